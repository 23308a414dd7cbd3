#include "zoge/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "zoge/random.hpp"

namespace zoge {

double wrap_phase(double phi) {
  double r = std::fmod(phi, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

void ChainSpec::validate() const {
  if (n_sites < 2) throw std::invalid_argument("n_sites: must be >= 2, got " + std::to_string(n_sites));
  if (!(j > 0.0)) throw std::invalid_argument("j: must be > 0");
  if (!(w >= 0.0)) throw std::invalid_argument("w: must be >= 0");
  if (!(u >= 0.0)) throw std::invalid_argument("u: must be >= 0");
  if (!std::isfinite(q)) throw std::invalid_argument("q: must be finite");
  if (!std::isfinite(phi)) throw std::invalid_argument("phi: must be finite");
  if (!std::isfinite(origin)) throw std::invalid_argument("origin: must be finite");
}

ChainSpec normalized(ChainSpec spec) {
  spec.phi = wrap_phase(spec.phi);
  return spec;
}

double onsite_potential(const ChainSpec& spec, int n) {
  if (n < 0 || n >= spec.n_sites)
    throw std::out_of_range("site " + std::to_string(n) + " outside [0, " + std::to_string(spec.n_sites) + ")");
  return -spec.w * std::cos(two_pi * spec.q * (n + spec.origin) + spec.phi);
}

SiteFieldTable site_fields(const ChainSpec& spec) {
  SiteFieldTable table{Eigen::VectorXd(spec.n_sites)};
  for (int n = 0; n < spec.n_sites; ++n) table.eps[n] = onsite_potential(spec, n);
  return table;
}

ChainSpec RealizationSet::realization(std::size_t i) const {
  ChainSpec s = base;
  s.phi = phases.at(i);
  return s;
}

RealizationSet make_realizations(const ChainSpec& spec, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("realizations: count must be >= 1");
  RealizationSet set{spec, {}, seed};
  Rng rng = make_stream(seed, 0, 0);
  while (static_cast<int>(set.phases.size()) < count) {
    const double phi = two_pi * uniform01(rng);
    if (std::find(set.phases.begin(), set.phases.end(), phi) == set.phases.end()) set.phases.push_back(phi);
  }
  return set;
}

RealizationSet make_realizations(const ChainSpec& spec, std::span<const double> phases) {
  if (phases.empty()) throw std::invalid_argument("realizations: phase list is empty");
  RealizationSet set{spec, {}, 0};
  for (double p : phases) {
    const double phi = wrap_phase(p);
    if (std::find(set.phases.begin(), set.phases.end(), phi) != set.phases.end())
      throw std::invalid_argument("realizations: duplicate phase");
    set.phases.push_back(phi);
  }
  return set;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && *first == ' ') ++first;
  while (last != first && *(last - 1) == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw std::invalid_argument(key + ": cannot parse '" + text + "'");
  return value;
}

}  // namespace

KeyValues to_key_values(const ChainSpec& spec, std::uint64_t seed) {
  return {{"n_sites", std::to_string(spec.n_sites)}, {"j", format_double(spec.j)},
          {"w", format_double(spec.w)},              {"u", format_double(spec.u)},
          {"q", format_double(spec.q)},              {"phi", format_double(spec.phi)},
          {"origin", format_double(spec.origin)},    {"seed", std::to_string(seed)}};
}

ChainSection chain_from_key_values(const KeyValues& kv) {
  ChainSection out;
  for (const auto& [key, value] : kv) {
    if (key == "n_sites") out.spec.n_sites = parse_number<int>(key, value);
    else if (key == "j") out.spec.j = parse_number<double>(key, value);
    else if (key == "w") out.spec.w = parse_number<double>(key, value);
    else if (key == "u") out.spec.u = parse_number<double>(key, value);
    else if (key == "q") out.spec.q = parse_number<double>(key, value);
    else if (key == "phi") out.spec.phi = parse_number<double>(key, value);
    else if (key == "origin") out.spec.origin = parse_number<double>(key, value);
    else if (key == "seed") out.seed = parse_number<std::uint64_t>(key, value);
    else throw std::invalid_argument(key + ": unknown key");
  }
  out.spec.validate();
  out.spec = normalized(out.spec);
  return out;
}

}  // namespace zoge

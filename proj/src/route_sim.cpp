#include "lmloc/route_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lmloc/error.hpp"
#include "lmloc/text.hpp"

namespace lmloc {
namespace {

enum Stream : std::uint64_t { kLatent = 1, kSalience = 2, kLandmarkNoise = 3, kTrainNoise = 4, kTestNoise = 5 };

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<bool> make_salience_mask(const WorldParams& p) {
  std::vector<bool> poor(p.n_viewpoints, false);
  if (!p.salience_mask || p.poor_fraction <= 0.0 || p.poor_segment_length == 0) return poor;
  const auto total = static_cast<std::size_t>(std::lround(p.poor_fraction * static_cast<double>(p.n_viewpoints)));
  const std::size_t len = p.poor_segment_length;
  const std::size_t segments = (total + len - 1) / len;
  if (segments * len > p.n_viewpoints) fail(ErrorCategory::usage, "feature-poor segments do not fit the route");

  // Random composition of the free viewpoints into segments+1 gaps.
  auto rng = make_stream(p.seed, kSalience);
  const std::size_t free = p.n_viewpoints - segments * len;
  std::uniform_int_distribution<std::size_t> cut(0, free);
  std::vector<std::size_t> cuts(segments);
  for (auto& c : cuts) c = cut(rng);
  std::sort(cuts.begin(), cuts.end());

  std::size_t placed = 0;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = cuts[s] + s * len;
    const std::size_t seg_len = std::min(len, total - placed);
    for (std::size_t i = 0; i < seg_len; ++i) poor[begin + i] = true;
    placed += seg_len;
  }
  return poor;
}

FeatureCollection observe_domain(const std::vector<std::vector<float>>& latent, const DomainTransform& t,
                                 double spacing, DomainTag tag, std::mt19937_64 rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  std::vector<ImageRecord> records;
  records.reserve(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const auto& z = latent[i];
    std::vector<float> v(z.size());
    for (std::size_t j = 0; j + 1 < z.size(); j += 2) {
      const double a = t.gain * z[j];
      const double b = t.gain * z[j + 1];
      v[j] = static_cast<float>(c * a - s * b);
      v[j + 1] = static_cast<float>(s * a + c * b);
    }
    if (z.size() % 2 == 1) v.back() = static_cast<float>(t.gain * z.back());
    // Noise is always drawn so each domain consumes its stream identically
    // regardless of sigma.
    for (auto& x : v) x = static_cast<float>(x + t.noise_sigma * noise(rng));
    records.push_back({static_cast<ImageId>(i), FeatureVector(std::move(v)),
                       static_cast<double>(i) * spacing, tag});
  }
  return FeatureCollection(std::move(records));
}

void set_transform(DomainTransform& t, std::string_view field, std::string_view value) {
  const auto v = text::parse_number<double>(value);
  if (field == "gain") t.gain = v;
  else if (field == "noise_sigma") t.noise_sigma = v;
  else if (field == "rotation") t.rotation = v;
  else fail(ErrorCategory::usage, "unknown domain parameter \"" + std::string(field) + "\"");
}

}  // namespace

void WorldParams::set(std::string_view key, std::string_view value) {
  key = text::trim(key);
  value = text::trim(value);
  if (key == "seed") seed = text::parse_number<std::uint64_t>(value);
  else if (key == "n_viewpoints") n_viewpoints = text::parse_number<std::size_t>(value);
  else if (key == "spacing") spacing = text::parse_number<double>(value);
  else if (key == "dim") dim = text::parse_number<std::size_t>(value);
  else if (key == "route_correlation") route_correlation = text::parse_number<double>(value);
  else if (key == "salience_mask") salience_mask = text::parse_number<int>(value) != 0;
  else if (key == "poor_fraction") poor_fraction = text::parse_number<double>(value);
  else if (key == "poor_segment_length") poor_segment_length = text::parse_number<std::size_t>(value);
  else if (key == "poor_variance_scale") poor_variance_scale = text::parse_number<double>(value);
  else if (key.rfind("landmark.", 0) == 0) set_transform(landmark, key.substr(9), value);
  else if (key.rfind("train.", 0) == 0) set_transform(train, key.substr(6), value);
  else if (key.rfind("test.", 0) == 0) set_transform(test, key.substr(5), value);
  else fail(ErrorCategory::usage, "unknown world parameter \"" + std::string(key) + "\"");
}

void WorldParams::apply_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = text::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCategory::usage, path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    set(view.substr(0, eq), view.substr(eq + 1));
  }
}

std::string WorldParams::describe() const {
  std::ostringstream out;
  auto domain = [&](const char* name, const DomainTransform& t) {
    out << ' ' << name << ".gain=" << text::format_double(t.gain) << ' ' << name
        << ".noise_sigma=" << text::format_double(t.noise_sigma) << ' ' << name
        << ".rotation=" << text::format_double(t.rotation);
  };
  out << "seed=" << seed << " n_viewpoints=" << n_viewpoints << " spacing=" << text::format_double(spacing)
      << " dim=" << dim << " route_correlation=" << text::format_double(route_correlation)
      << " salience_mask=" << (salience_mask ? 1 : 0) << " poor_fraction=" << text::format_double(poor_fraction)
      << " poor_segment_length=" << poor_segment_length
      << " poor_variance_scale=" << text::format_double(poor_variance_scale);
  domain("landmark", landmark);
  domain("train", train);
  domain("test", test);
  return out.str();
}

WorldParams noiseless_params(std::uint64_t seed, std::size_t n_viewpoints, std::size_t dim) {
  WorldParams p;
  p.seed = seed;
  p.n_viewpoints = n_viewpoints;
  p.dim = dim;
  p.salience_mask = false;
  p.landmark = p.train = p.test = DomainTransform{1.0, 0.0, 0.0};
  return p;
}

RouteWorld generate(const WorldParams& params) {
  if (params.n_viewpoints < 2) fail(ErrorCategory::usage, "route needs at least 2 viewpoints");
  if (params.dim == 0) fail(ErrorCategory::usage, "latent dimension must be positive");
  if (!(params.spacing > 0.0)) fail(ErrorCategory::usage, "viewpoint spacing must be positive");
  if (params.route_correlation < 0.0 || params.route_correlation >= 1.0) {
    fail(ErrorCategory::usage, "route_correlation must be in [0, 1)");
  }

  RouteWorld world;
  world.params = params;
  world.feature_poor = make_salience_mask(params);

  auto rng = make_stream(params.seed, kLatent);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double phi = params.route_correlation;
  const double innovation = std::sqrt(1.0 - phi * phi);
  std::vector<double> state(params.dim);
  for (auto& x : state) x = gauss(rng);
  world.latent.resize(params.n_viewpoints);
  const double poor_scale = std::sqrt(params.poor_variance_scale);
  for (std::size_t i = 0; i < params.n_viewpoints; ++i) {
    if (i > 0) {
      for (auto& x : state) x = phi * x + innovation * gauss(rng);
    }
    const double scale = world.feature_poor[i] ? poor_scale : 1.0;
    auto& z = world.latent[i];
    z.resize(params.dim);
    for (std::size_t j = 0; j < params.dim; ++j) z[j] = static_cast<float>(scale * state[j]);
  }

  world.landmark = observe_domain(world.latent, params.landmark, params.spacing, DomainTag::landmark,
                                  make_stream(params.seed, kLandmarkNoise));
  world.train = observe_domain(world.latent, params.train, params.spacing, DomainTag::train,
                               make_stream(params.seed, kTrainNoise));
  world.test = observe_domain(world.latent, params.test, params.spacing, DomainTag::test,
                              make_stream(params.seed, kTestNoise));
  return world;
}

DomainFiles domain_files(const std::filesystem::path& dir, DomainTag tag) {
  const std::string stem(to_string(tag));
  return {dir / (stem + ".fvec"), dir / (stem + ".csv")};
}

void save_world(const RouteWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto* c : {&world.landmark, &world.train, &world.test}) {
    const auto files = domain_files(dir, c->empty() ? DomainTag::train : (*c)[0].domain);
    save_features(*c, files.features, files.viewpoints);
  }
}

Environment::Environment(FeatureCollection observations)
    : observations_(std::move(observations)), arclengths_(observations_.arclengths()) {
  if (observations_.empty()) fail(ErrorCategory::data, "environment needs at least one viewpoint");
}

std::size_t Environment::nearest_viewpoint(double position) const {
  const auto it = std::lower_bound(arclengths_.begin(), arclengths_.end(), position);
  if (it == arclengths_.begin()) return 0;
  if (it == arclengths_.end()) return arclengths_.size() - 1;
  auto idx = static_cast<std::size_t>(it - arclengths_.begin());
  if (position - arclengths_[idx - 1] <= arclengths_[idx] - position) --idx;
  return idx;
}

const FeatureVector& Environment::observe(double position) const {
  return observations_[nearest_viewpoint(position)].feature;
}

std::size_t Environment::step(EpisodeState& state, double action) const {
  state.true_position = std::clamp(state.true_position + action, route_start(), route_end());
  ++state.step;
  return nearest_viewpoint(state.true_position);
}

}  // namespace lmloc

#include "aero/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace aero::synth {

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::drift: return "drift";
    case NoiseKind::darken_recover: return "darken_recover";
    case NoiseKind::brighten: return "brighten";
  }
  return "?";
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::flare: return "flare";
    case AnomalyKind::dip: return "dip";
    case AnomalyKind::burst: return "burst";
  }
  return "?";
}

std::vector<double> draw_periods(const GenSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const auto n_variable = static_cast<std::size_t>(
      std::lround(std::clamp(spec.variable_fraction, 0.0, 1.0) * static_cast<double>(spec.n_variates)));
  std::vector<std::size_t> order(spec.n_variates);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> period(spec.min_period, spec.max_period);
  std::vector<double> periods(spec.n_variates, 0.0);
  for (std::size_t i = 0; i < n_variable; ++i) periods[order[i]] = period(rng);
  return periods;
}

double sinusoid(std::int64_t position, double period) {
  return 2.0 * std::sin(2.0 * std::numbers::pi / period * static_cast<double>(position));
}

double noise_shape(NoiseKind kind, std::size_t k, std::size_t duration, double amplitude) {
  const double frac = static_cast<double>(k) / static_cast<double>(duration);
  switch (kind) {
    case NoiseKind::drift: return amplitude;
    case NoiseKind::darken_recover: return amplitude * std::sin(std::numbers::pi * frac);
    case NoiseKind::brighten:
      return amplitude * std::expm1(kBrightenCurvature * frac) / std::expm1(kBrightenCurvature);
  }
  return 0.0;
}

double anomaly_shape(AnomalyKind kind, std::size_t k, std::size_t duration, double amplitude) {
  switch (kind) {
    case AnomalyKind::flare: {
      // peak a quarter of the way in; steep rise, slower decay to baseline
      const std::size_t peak = duration / 4;
      const double rise_tau = std::max<double>(static_cast<double>(peak), 1.0) / 3.0;
      const double decay_tau = static_cast<double>(duration - peak) / 5.0;
      if (k <= peak) return amplitude * std::exp(-static_cast<double>(peak - k) / rise_tau);
      return amplitude * std::exp(-static_cast<double>(k - peak) / decay_tau);
    }
    case AnomalyKind::dip: return -noise_shape(NoiseKind::darken_recover, k, duration, amplitude);
    case AnomalyKind::burst: return amplitude;  // sign applied per point by the injector
  }
  return 0.0;
}

data::ObservationFrame gen_basic(const GenSpec& spec) {
  const std::vector<double> periods = draw_periods(spec);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, spec.noise_sigma);
  data::ObservationFrame f;
  f.values = Matrix(spec.n_variates, spec.length);
  for (std::size_t r = 0; r < spec.n_variates; ++r) {
    f.names.push_back("star" + std::to_string(r));
    auto row = f.values.row(r);
    for (std::size_t c = 0; c < spec.length; ++c) {
      const auto pos = spec.first_position + static_cast<std::int64_t>(c);
      row[c] = (periods[r] > 0.0 ? sinusoid(pos, periods[r]) : 0.0) + gauss(rng);
    }
  }
  f.times.resize(spec.length);
  for (std::size_t c = 0; c < spec.length; ++c) f.times[c] = static_cast<double>(spec.first_position) + c;
  return f;
}

namespace {

void check_bounds(const data::ObservationFrame& f, std::size_t variate, std::size_t start, std::size_t duration,
                  const char* what) {
  if (duration == 0) throw GenerationError(std::string(what) + " duration must be >= 1");
  if (variate >= f.variates()) throw GenerationError(std::string(what) + " variate out of range");
  if (start + duration > f.length()) throw GenerationError(std::string(what) + " interval leaves the frame");
}

}  // namespace

data::ObservationFrame inject_noise(const data::ObservationFrame& frame, const std::vector<NoiseEvent>& events) {
  data::ObservationFrame out = frame;
  if (!out.noise_mask) out.noise_mask = BinaryMatrix(frame.variates(), frame.length());
  for (const auto& e : events) {
    std::set<std::size_t> unique(e.variates.begin(), e.variates.end());
    if (unique.size() < 2) throw GenerationError("noise event must touch at least two variates");
    for (std::size_t v : unique) {
      check_bounds(frame, v, e.start, e.duration, "noise event");
      for (std::size_t k = 0; k < e.duration; ++k) {
        const std::size_t c = e.start + k;
        if (out.labels && (*out.labels)(v, c)) {
          throw GenerationError("noise event overlaps an anomaly on variate " + std::to_string(v) + " at " +
                                std::to_string(c));
        }
        out.values(v, c) += noise_shape(e.kind, k, e.duration, e.amplitude);
        out.noise_mask->set(v, c);
      }
    }
  }
  return out;
}

data::ObservationFrame inject_anomalies(const data::ObservationFrame& frame, const std::vector<AnomalyEvent>& events,
                                        std::uint64_t seed) {
  data::ObservationFrame out = frame;
  if (!out.labels) out.labels = BinaryMatrix(frame.variates(), frame.length());
  std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
  std::bernoulli_distribution coin(0.5);
  for (const auto& e : events) {
    check_bounds(frame, e.variate, e.start, e.duration, "anomaly event");
    for (std::size_t k = 0; k < e.duration; ++k) {
      const std::size_t c = e.start + k;
      if (out.noise_mask && (*out.noise_mask)(e.variate, c)) {
        throw GenerationError("anomaly overlaps concurrent noise on variate " + std::to_string(e.variate) + " at " +
                              std::to_string(c));
      }
      double v = anomaly_shape(e.kind, k, e.duration, e.amplitude);
      if (e.kind == AnomalyKind::burst && coin(rng)) v = -v;
      out.values(e.variate, c) += v;
      out.labels->set(e.variate, c);
    }
  }
  return out;
}

PresetParams preset_params(const std::string& name) {
  PresetParams p;
  p.name = name;
  if (name == "middle") return p;
  if (name == "high") {
    p.anomaly_segments = 10;
    p.anomaly_rate = 0.00359;
    return p;
  }
  if (name == "low") {
    p.noise_rate = 0.03438;
    p.noise_events = 12;
    return p;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected middle, high or low)");
}

namespace {

struct Interval {
  std::size_t begin, end;  // [begin, end)
};

bool overlaps(const Interval& a, const Interval& b, std::size_t gap) {
  return a.begin < b.end + gap && b.begin < a.end + gap;
}

std::vector<std::size_t> split_evenly(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

std::vector<AnomalyEvent> place_anomalies(const PresetParams& p, std::mt19937_64& rng) {
  const std::size_t cells =
      static_cast<std::size_t>(std::lround(p.anomaly_rate * static_cast<double>(p.n_variates * p.test_length)));
  if (p.anomaly_segments == 0) return {};
  const auto durations = split_evenly(std::max(cells, p.anomaly_segments), p.anomaly_segments);
  std::uniform_int_distribution<std::size_t> variate(0, p.n_variates - 1);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> amp(p.anomaly_amp_min, p.anomaly_amp_max);
  std::vector<AnomalyEvent> events;
  std::vector<Interval> taken;
  for (std::size_t d : durations) {
    if (p.min_gap + d >= p.test_length) throw GenerationError("test split too short for anomaly placement");
    std::uniform_int_distribution<std::size_t> start(p.min_gap, p.test_length - d - 1);
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      Interval iv{start(rng), 0};
      iv.end = iv.begin + d;
      if (std::any_of(taken.begin(), taken.end(), [&](const Interval& t) { return overlaps(iv, t, p.min_gap); })) {
        continue;
      }
      taken.push_back(iv);
      events.push_back({static_cast<AnomalyKind>(kind(rng)), variate(rng), iv.begin, d, amp(rng)});
      placed = true;
    }
    if (!placed) throw GenerationError("could not place anomaly segments with the requested spacing");
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return events;
}

std::vector<NoiseEvent> place_noise(const PresetParams& p, std::size_t length, const std::vector<std::size_t>& pool,
                                    const std::vector<AnomalyEvent>& anomalies, std::mt19937_64& rng) {
  if (p.noise_events == 0 || p.noise_rate <= 0.0) return {};
  if (pool.size() < 2) throw GenerationError("noise needs at least two affected variates");
  const std::size_t k = p.noise_events;
  std::uniform_int_distribution<std::size_t> size_dist(std::min<std::size_t>(3, pool.size()),
                                                       std::min<std::size_t>(7, pool.size()));
  std::vector<std::vector<std::size_t>> sets(k);
  for (auto& s : sets) {
    std::vector<std::size_t> shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    s.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
  }
  // every pool variate is affected at least once
  std::uniform_int_distribution<std::size_t> which(0, k - 1);
  for (std::size_t v : pool) {
    const bool covered = std::any_of(sets.begin(), sets.end(),
                                     [&](const auto& s) { return std::find(s.begin(), s.end(), v) != s.end(); });
    if (!covered) sets[which(rng)].push_back(v);
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());

  const double target = p.noise_rate * static_cast<double>(p.n_variates * length);
  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  std::vector<double> weight(k);
  double denom = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    weight[i] = jitter(rng);
    denom += weight[i] * static_cast<double>(sets[i].size());
  }
  std::vector<std::size_t> durations(k);
  double assigned = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    durations[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(target * weight[i] / denom)));
    assigned += static_cast<double>(durations[i] * sets[i].size());
  }
  durations[k - 1] = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround((target - assigned) / static_cast<double>(sets[k - 1].size()))));

  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> amp(p.noise_amp_min, p.noise_amp_max);
  std::bernoulli_distribution negative(0.5);
  std::vector<NoiseEvent> events;
  std::vector<Interval> taken;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t d = durations[i];
    if (d + 1 >= length) throw GenerationError("noise event longer than the split");
    std::uniform_int_distribution<std::size_t> start(0, length - d - 1);
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      Interval iv{start(rng), 0};
      iv.end = iv.begin + d;
      if (std::any_of(taken.begin(), taken.end(), [&](const Interval& t) { return overlaps(iv, t, 10); })) continue;
      const bool clash = std::any_of(anomalies.begin(), anomalies.end(), [&](const AnomalyEvent& a) {
        return std::binary_search(sets[i].begin(), sets[i].end(), a.variate) &&
               overlaps(iv, Interval{a.start, a.start + a.duration}, 0);
      });
      if (clash) continue;
      taken.push_back(iv);
      NoiseEvent e{static_cast<NoiseKind>(kind(rng)), sets[i], iv.begin, d, amp(rng)};
      if (e.kind == NoiseKind::drift && negative(rng)) e.amplitude = -e.amplitude;
      events.push_back(std::move(e));
      placed = true;
    }
    if (!placed) throw GenerationError("could not place noise events without overlap");
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return events;
}

}  // namespace

Dataset gen_dataset(const PresetParams& p, std::uint64_t seed) {
  if (p.noise_variates > p.n_variates) throw GenerationError("more noise variates than variates");
  std::mt19937_64 rng(seed);
  GenSpec basic;
  basic.n_variates = p.n_variates;
  basic.length = p.train_length + p.test_length;
  basic.variable_fraction = p.variable_fraction;
  basic.noise_sigma = p.noise_sigma;
  basic.seed = rng();
  const data::ObservationFrame full = gen_basic(basic);

  std::vector<std::size_t> order(p.n_variates);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(p.noise_variates));
  std::sort(pool.begin(), pool.end());

  Dataset ds;
  ds.test_anomalies = place_anomalies(p, rng);
  ds.train_noise = place_noise(p, p.train_length, pool, {}, rng);
  ds.test_noise = place_noise(p, p.test_length, pool, ds.test_anomalies, rng);

  ds.train = full.slice(0, p.train_length);
  ds.train.labels = BinaryMatrix(p.n_variates, p.train_length);
  ds.train = inject_noise(ds.train, ds.train_noise);

  ds.test = full.slice(p.train_length, p.train_length + p.test_length);
  ds.test = inject_anomalies(ds.test, ds.test_anomalies, rng());
  ds.test = inject_noise(ds.test, ds.test_noise);
  return ds;
}

Dataset gen_dataset(const std::string& preset, std::uint64_t seed) { return gen_dataset(preset_params(preset), seed); }

DatasetStats compute_stats(const data::ObservationFrame& frame) {
  DatasetStats s;
  const double cells = static_cast<double>(frame.variates() * frame.length());
  if (frame.labels) {
    s.anomaly_percent = 100.0 * static_cast<double>(frame.labels->count()) / cells;
    for (std::size_t r = 0; r < frame.variates(); ++r) {
      for (std::size_t c = 0; c < frame.length(); ++c) {
        if ((*frame.labels)(r, c) && (c == 0 || !(*frame.labels)(r, c - 1))) ++s.anomaly_segments;
      }
    }
  }
  if (frame.noise_mask) {
    s.noise_percent = 100.0 * static_cast<double>(frame.noise_mask->count()) / cells;
    for (std::size_t r = 0; r < frame.variates(); ++r) {
      for (std::size_t c = 0; c < frame.length(); ++c) {
        if ((*frame.noise_mask)(r, c)) {
          ++s.noise_variates;
          break;
        }
      }
    }
  }
  s.anomaly_to_noise = s.noise_percent > 0.0 ? s.anomaly_percent / s.noise_percent : 0.0;
  return s;
}

}  // namespace aero::synth

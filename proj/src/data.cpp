#include "leaf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace leaf {

namespace {

constexpr int64_t kCadenceSeconds = 300;
constexpr int64_t kStepsPerDay = 288;

[[noreturn]] void load_error(const std::string& file, const std::string& what) {
  throw std::runtime_error("failed to load " + file + ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// days-from-civil / civil-from-days (proleptic Gregorian), so parsing does
// not depend on the host timezone database.
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t& y, int64_t& m, int64_t& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const int64_t doe = z - era * 146097;
  const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = yoe + era * 400;
  const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int64_t mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

}  // namespace

int64_t parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec) != 6)
    throw std::runtime_error("invalid ISO-8601 timestamp: '" + s + "'");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601(int64_t t) {
  int64_t days = t / 86400, rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int64_t y, m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lldT%02lld:%02lld:%02lld",
                static_cast<long long>(y), static_cast<long long>(m),
                static_cast<long long>(d), static_cast<long long>(rem / 3600),
                static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

std::string format_human_time(int64_t t) {
  std::string iso = format_iso8601(t);
  iso[10] = ' ';
  return iso.substr(0, 16);
}

SplitRanges split_ranges(int64_t t_total, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) ||
      !(spec.val_fraction > 0.0 && spec.val_fraction < 1.0) ||
      spec.train_fraction + spec.val_fraction >= 1.0)
    throw std::invalid_argument("split fractions must lie in (0,1) and sum below 1");
  SplitRanges r;
  r.t_total = t_total;
  r.train_end = static_cast<int64_t>(std::floor(t_total * spec.train_fraction));
  r.val_end = static_cast<int64_t>(
      std::floor(t_total * (spec.train_fraction + spec.val_fraction)));
  return r;
}

NormStats compute_norm_stats(const Dataset& ds, int64_t train_end) {
  if (train_end <= 0 || train_end > ds.t_total())
    throw std::invalid_argument("compute_norm_stats: bad training range");
  const int64_t n = ds.n_vertices(), f = ds.n_features();
  NormStats stats;
  stats.mean.assign(static_cast<size_t>(f), 0.0);
  stats.stdev.assign(static_cast<size_t>(f), 0.0);
  const double count = static_cast<double>(train_end * n);
  for (int64_t c = 0; c < f; ++c) {
    double acc = 0.0;
    for (int64_t t = 0; t < train_end; ++t)
      for (int64_t i = 0; i < n; ++i) acc += ds.flow(t, i, c);
    const double mean = acc / count;
    double sq = 0.0;
    for (int64_t t = 0; t < train_end; ++t)
      for (int64_t i = 0; i < n; ++i) {
        const double d = ds.flow(t, i, c) - mean;
        sq += d * d;
      }
    stats.mean[static_cast<size_t>(c)] = mean;
    stats.stdev[static_cast<size_t>(c)] = std::max(std::sqrt(sq / count), 1e-6);
  }
  return stats;
}

Tensor normalize(const Tensor& t, const NormStats& stats) {
  const int64_t f = t.dim(t.rank() - 1);
  if (f != static_cast<int64_t>(stats.mean.size()))
    throw std::invalid_argument("normalize: channel count mismatch");
  Tensor out = t;
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) {
    const size_t c = static_cast<size_t>(i % f);
    out[i] = (out[i] - stats.mean[c]) / stats.stdev[c];
  }
  return out;
}

Tensor denormalize(const Tensor& t, const NormStats& stats) {
  const int64_t f = t.dim(t.rank() - 1);
  if (f != static_cast<int64_t>(stats.mean.size()))
    throw std::invalid_argument("denormalize: channel count mismatch");
  Tensor out = t;
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) {
    const size_t c = static_cast<size_t>(i % f);
    out[i] = out[i] * stats.stdev[c] + stats.mean[c];
  }
  return out;
}

double normalize_flow(double v, const NormStats& stats) {
  return (v - stats.mean[0]) / stats.stdev[0];
}

double denormalize_flow(double v, const NormStats& stats) {
  return v * stats.stdev[0] + stats.mean[0];
}

std::vector<Window> make_windows(const Dataset& ds, int64_t t_in, int64_t t_out,
                                 int64_t stride, int64_t begin, int64_t end) {
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
  if (begin < 0 || end > ds.t_total() || begin > end)
    throw std::invalid_argument("make_windows: bad range");
  const int64_t span = t_in + t_out;
  if (end - begin < span)
    throw std::invalid_argument("make_windows: range shorter than one window");
  const int64_t n = ds.n_vertices(), f = ds.n_features();
  std::vector<Window> windows;
  for (int64_t s = begin; s + span <= end; s += stride) {
    Window w;
    w.start = s;
    w.input = Tensor({t_in, n, f});
    for (int64_t t = 0; t < t_in; ++t)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < f; ++c)
          w.input[(t * n + i) * f + c] = ds.flow(s + t, i, c);
    w.target = Tensor({t_out, n});
    for (int64_t t = 0; t < t_out; ++t)
      for (int64_t i = 0; i < n; ++i)
        w.target[t * n + i] = ds.flow(s + t_in + t, i, 0);
    windows.push_back(std::move(w));
  }
  return windows;
}

Dataset synth_generate(int64_t n_vertices, int64_t days, const ShiftSpec& shift,
                       uint64_t seed) {
  if (n_vertices < 1 || days < 1)
    throw std::invalid_argument("synth_generate: n_vertices and days must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int64_t t_total = days * kStepsPerDay;
  Dataset ds;
  ds.network.n_vertices = n_vertices;
  for (int64_t i = 0; i < n_vertices; ++i) {
    SensorMeta meta;
    char id[32];
    std::snprintf(id, sizeof(id), "S%03d", static_cast<int>(i % 1000000));
    meta.id = id;
    const double angle = 2.0 * M_PI * static_cast<double>(i) /
                         static_cast<double>(std::max<int64_t>(n_vertices, 1));
    meta.lat = 34.05 + 0.05 * std::sin(angle);
    meta.lon = -118.25 + 0.05 * std::cos(angle);
    meta.description = "ring road sensor " + std::to_string(i);
    ds.network.sensors.push_back(std::move(meta));
  }
  if (n_vertices == 2) {
    ds.network.add_edge(0, 1);
  } else if (n_vertices > 2) {
    for (int64_t i = 0; i < n_vertices; ++i)
      ds.network.add_edge(i, (i + 1) % n_vertices);
  }

  // Per-vertex character: base level, bump amplitudes, rush-hour phase.
  std::vector<double> base(static_cast<size_t>(n_vertices));
  std::vector<double> amp_am(static_cast<size_t>(n_vertices));
  std::vector<double> amp_pm(static_cast<size_t>(n_vertices));
  std::vector<double> phase(static_cast<size_t>(n_vertices));  // minutes
  for (int64_t i = 0; i < n_vertices; ++i) {
    base[static_cast<size_t>(i)] = 110.0 + 25.0 * unit(rng);
    amp_am[static_cast<size_t>(i)] = 55.0 + 15.0 * unit(rng);
    amp_pm[static_cast<size_t>(i)] = 55.0 + 15.0 * unit(rng);
    phase[static_cast<size_t>(i)] = (unit(rng) - 0.5) * 60.0;
  }

  std::normal_distribution<double> noise(0.0, 4.0);
  const int64_t shift_start =
      static_cast<int64_t>(std::floor(t_total * shift.start_fraction));

  ds.flows = Tensor({t_total, n_vertices, 1});
  ds.timestamps.resize(static_cast<size_t>(t_total));
  const int64_t t0 = parse_iso8601("2024-01-01T00:00:00");
  const double sigma_min = 75.0;  // bump width in minutes
  for (int64_t t = 0; t < t_total; ++t) {
    ds.timestamps[static_cast<size_t>(t)] = t0 + t * kCadenceSeconds;
    const double minute_of_day = static_cast<double>((t % kStepsPerDay) * 5);
    for (int64_t i = 0; i < n_vertices; ++i) {
      const size_t v = static_cast<size_t>(i);
      const double am = minute_of_day - (8.0 * 60.0 + phase[v]);
      const double pm = minute_of_day - (18.0 * 60.0 + phase[v]);
      double flow = base[v] +
                    amp_am[v] * std::exp(-0.5 * (am / sigma_min) * (am / sigma_min)) +
                    amp_pm[v] * std::exp(-0.5 * (pm / sigma_min) * (pm / sigma_min)) +
                    noise(rng);
      if (t >= shift_start && shift_start < t_total) {
        const int64_t denom = t_total - 1 - shift_start;
        const double progress =
            denom > 0 ? static_cast<double>(t - shift_start) / static_cast<double>(denom)
                      : 0.0;
        flow *= shift.scale * (1.0 + shift.trend * progress);
      }
      ds.flows[(t * n_vertices + i)] = std::max(flow, 0.0);
    }
  }
  return ds;
}

Dataset load_dataset(const std::string& flow_path,
                     const std::string& adjacency_path,
                     const std::string& meta_path) {
  Dataset ds;

  // sensor meta defines the vertex universe and its dense index order
  std::ifstream meta_in(meta_path);
  if (!meta_in) load_error(meta_path, "cannot open file");
  nlohmann::json meta_json;
  try {
    meta_in >> meta_json;
  } catch (const std::exception& e) {
    load_error(meta_path, e.what());
  }
  if (!meta_json.is_array()) load_error(meta_path, "expected a JSON array");
  std::unordered_map<std::string, int64_t> index_of;
  for (const auto& entry : meta_json) {
    SensorMeta meta;
    if (!entry.contains("sensor_id"))
      load_error(meta_path, "sensor entry missing 'sensor_id'");
    meta.id = entry.at("sensor_id").get<std::string>();
    if (entry.contains("lat") && !entry.at("lat").is_null())
      meta.lat = entry.at("lat").get<double>();
    if (entry.contains("lon") && !entry.at("lon").is_null())
      meta.lon = entry.at("lon").get<double>();
    if (entry.contains("description") && !entry.at("description").is_null())
      meta.description = entry.at("description").get<std::string>();
    if (index_of.count(meta.id))
      load_error(meta_path, "duplicate sensor id '" + meta.id + "'");
    index_of[meta.id] = static_cast<int64_t>(ds.network.sensors.size());
    ds.network.sensors.push_back(std::move(meta));
  }
  ds.network.n_vertices = static_cast<int64_t>(ds.network.sensors.size());
  if (ds.network.n_vertices == 0) load_error(meta_path, "no sensors");

  // adjacency: header from,to,cost; costs are thresholded to 0/1 membership
  std::ifstream adj_in(adjacency_path);
  if (!adj_in) load_error(adjacency_path, "cannot open file");
  std::string line;
  if (!std::getline(adj_in, line)) load_error(adjacency_path, "empty file");
  size_t lineno = 1;
  while (std::getline(adj_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 3)
      load_error(adjacency_path,
                 "line " + std::to_string(lineno) + ": expected from,to,cost");
    for (const auto& id : {cells[0], cells[1]})
      if (!index_of.count(id))
        load_error(adjacency_path,
                   "line " + std::to_string(lineno) + ": unknown sensor id '" + id + "'");
    try {
      std::stod(cells[2]);
    } catch (const std::exception&) {
      load_error(adjacency_path,
                 "line " + std::to_string(lineno) + ": bad cost '" + cells[2] + "'");
    }
    const int64_t a = index_of[cells[0]], b = index_of[cells[1]];
    if (a == b)
      load_error(adjacency_path,
                 "line " + std::to_string(lineno) + ": self-edge on '" + cells[0] + "'");
    ds.network.add_edge(a, b);
  }

  // flow: header timestamp,<id>... ; column order may differ from meta order
  std::ifstream flow_in(flow_path);
  if (!flow_in) load_error(flow_path, "cannot open file");
  if (!std::getline(flow_in, line)) load_error(flow_path, "empty file");
  auto header = split_csv_line(line);
  if (header.size() != static_cast<size_t>(ds.network.n_vertices) + 1 ||
      header[0] != "timestamp")
    load_error(flow_path, "header must be 'timestamp' plus one column per sensor");
  std::vector<int64_t> col_vertex(header.size() - 1);
  std::vector<bool> seen(static_cast<size_t>(ds.network.n_vertices), false);
  for (size_t c = 1; c < header.size(); ++c) {
    auto it = index_of.find(header[c]);
    if (it == index_of.end())
      load_error(flow_path, "unknown sensor id '" + header[c] + "' in header");
    if (seen[static_cast<size_t>(it->second)])
      load_error(flow_path, "duplicate sensor column '" + header[c] + "'");
    seen[static_cast<size_t>(it->second)] = true;
    col_vertex[c - 1] = it->second;
  }

  std::vector<double> values;
  lineno = 1;
  while (std::getline(flow_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      load_error(flow_path, "line " + std::to_string(lineno) + ": wrong cell count");
    int64_t ts;
    try {
      ts = parse_iso8601(cells[0]);
    } catch (const std::exception& e) {
      load_error(flow_path, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ds.timestamps.empty()) {
      if (ts == ds.timestamps.back())
        load_error(flow_path,
                   "line " + std::to_string(lineno) + ": duplicate timestamp " + cells[0]);
      if (ts - ds.timestamps.back() != kCadenceSeconds)
        load_error(flow_path, "line " + std::to_string(lineno) +
                                  ": timestamps must advance by exactly 5 minutes");
    }
    ds.timestamps.push_back(ts);
    std::vector<double> row(static_cast<size_t>(ds.network.n_vertices));
    for (size_t c = 1; c < cells.size(); ++c) {
      double v;
      try {
        v = std::stod(cells[c]);
      } catch (const std::exception&) {
        load_error(flow_path, "line " + std::to_string(lineno) + ": bad value '" +
                                  cells[c] + "'");
      }
      if (!std::isfinite(v) || v < 0.0)
        load_error(flow_path,
                   "line " + std::to_string(lineno) + ": flows must be finite and >= 0");
      row[static_cast<size_t>(col_vertex[c - 1])] = v;
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  if (ds.timestamps.empty()) load_error(flow_path, "no data rows");
  ds.flows = Tensor({static_cast<int64_t>(ds.timestamps.size()),
                     ds.network.n_vertices, 1},
                    std::move(values));
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& flow_path,
                   const std::string& adjacency_path,
                   const std::string& meta_path) {
  {
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& s : ds.network.sensors) {
      nlohmann::json e;
      e["sensor_id"] = s.id;
      if (s.lat) e["lat"] = *s.lat;
      if (s.lon) e["lon"] = *s.lon;
      e["description"] = s.description;
      meta.push_back(std::move(e));
    }
    std::ofstream out(meta_path);
    if (!out) throw std::runtime_error("cannot write " + meta_path);
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(adjacency_path);
    if (!out) throw std::runtime_error("cannot write " + adjacency_path);
    out << "from,to,cost\n";
    for (const auto& [i, j] : ds.network.edges)
      out << ds.network.sensors[static_cast<size_t>(i)].id << ","
          << ds.network.sensors[static_cast<size_t>(j)].id << ",1\n";
  }
  {
    std::ofstream out(flow_path);
    if (!out) throw std::runtime_error("cannot write " + flow_path);
    out << "timestamp";
    for (const auto& s : ds.network.sensors) out << "," << s.id;
    out << "\n";
    char buf[32];
    for (int64_t t = 0; t < ds.t_total(); ++t) {
      out << format_iso8601(ds.timestamps[static_cast<size_t>(t)]);
      for (int64_t i = 0; i < ds.n_vertices(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds.flow(t, i, 0));
        out << "," << buf;
      }
      out << "\n";
    }
  }
}

}  // namespace leaf

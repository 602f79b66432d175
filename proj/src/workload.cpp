#include "schedforge/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "schedforge/errors.hpp"
#include "schedforge/rng.hpp"

namespace schedforge {

namespace {

constexpr int kSwfColumns = 18;

bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::int64_t to_i64(double v) { return static_cast<std::int64_t>(std::llround(v)); }

JobStatus status_from_raw(std::int64_t raw) {
  switch (raw) {
    case 0: return JobStatus::failed;
    case 1: return JobStatus::completed;
    case 5: return JobStatus::cancelled;
    default: return JobStatus::unknown;
  }
}

std::int64_t status_to_raw(JobStatus s) {
  return s == JobStatus::unknown ? -1 : static_cast<std::int64_t>(s);
}

std::int64_t sanitize(std::int64_t v) { return v < 0 ? -1 : v; }

// Column-level validation and the normalizations the simulator relies on.
// Returns false when the record cannot be repaired (caller skips or throws).
bool validate_record(JobRecord& j, std::size_t& remapped) {
  if (j.job_id < 0 || j.submit_time < 0) return false;
  j.wait_time = sanitize(j.wait_time);
  j.run_time = sanitize(j.run_time);
  j.used_memory = sanitize(j.used_memory);
  j.requested_memory = sanitize(j.requested_memory);
  if (j.used_cpu_time < 0) j.used_cpu_time = -1.0;
  if (j.used_procs < 1) j.used_procs = -1;
  if (j.requested_procs < 1) {
    if (j.used_procs < 1) return false;
    j.requested_procs = j.used_procs;
    ++remapped;
  }
  if (j.requested_time <= 0) {
    j.requested_time = j.run_time > 0 ? j.run_time : -1;
  }
  return true;
}

void sort_jobs(std::vector<JobRecord>& jobs) {
  std::stable_sort(jobs.begin(), jobs.end(), [](const JobRecord& a, const JobRecord& b) {
    if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
    return a.job_id < b.job_id;
  });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<int> header_int(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) return std::nullopt;
  double v = 0;
  if (!parse_double(trim(it->second), v) || v < 1) return std::nullopt;
  return static_cast<int>(v);
}

}  // namespace

std::optional<int> WorkloadTrace::max_nodes() const { return header_int(header, "MaxNodes"); }
std::optional<int> WorkloadTrace::max_procs() const { return header_int(header, "MaxProcs"); }

int WorkloadTrace::node_count() const {
  if (auto n = max_nodes()) return *n;
  if (auto p = max_procs()) return *p;
  int best = 1;
  for (const auto& j : jobs) best = std::max(best, j.requested_procs);
  return best;
}

int WorkloadTrace::procs_per_node() const {
  auto nodes = max_nodes();
  auto procs = max_procs();
  if (nodes && procs && *nodes > 0) return std::max(1, *procs / *nodes);
  return 1;
}

WorkloadTrace parse_swf(std::string_view text, ParseMode mode) {
  WorkloadTrace trace;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> tokens;

  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == ';') {
      std::string_view body = trim(line.substr(1));
      std::size_t colon = body.find(':');
      if (colon != std::string_view::npos && colon > 0) {
        std::string key(trim(body.substr(0, colon)));
        std::string value(trim(body.substr(colon + 1)));
        if (!key.empty()) trace.header.emplace(std::move(key), std::move(value));
      }
      continue;
    }

    tokens.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty()) continue;

    if (tokens.size() != kSwfColumns) {
      if (mode == ParseMode::strict) {
        throw MissingFieldsError("line " + std::to_string(line_no) + ": expected 18 fields, found " +
                                 std::to_string(tokens.size()));
      }
      ++trace.skipped_lines;
      continue;
    }

    double col[kSwfColumns];
    bool numeric = true;
    for (int c = 0; c < kSwfColumns; ++c) {
      if (!parse_double(tokens[c], col[c])) {
        numeric = false;
        if (mode == ParseMode::strict) {
          throw NonNumericFieldError("line " + std::to_string(line_no) + ": field " +
                                     std::to_string(c + 1) + " is not numeric: '" +
                                     std::string(tokens[c]) + "'");
        }
        break;
      }
    }
    if (!numeric) {
      ++trace.skipped_lines;
      continue;
    }

    JobRecord j;
    j.job_id = to_i64(col[0]);
    j.submit_time = to_i64(col[1]);
    j.wait_time = to_i64(col[2]);
    j.run_time = to_i64(col[3]);
    j.used_procs = static_cast<int>(to_i64(col[4]));
    j.used_cpu_time = col[5];
    j.used_memory = to_i64(col[6]);
    j.requested_procs = static_cast<int>(to_i64(col[7]));
    j.requested_time = to_i64(col[8]);
    j.requested_memory = to_i64(col[9]);
    j.status = status_from_raw(to_i64(col[10]));
    j.user_id = to_i64(col[11]);
    j.group_id = to_i64(col[12]);
    j.executable_id = to_i64(col[13]);
    j.queue_id = to_i64(col[14]);
    j.partition_id = to_i64(col[15]);
    j.preceding_job_id = to_i64(col[16]);
    j.think_time = to_i64(col[17]);

    if (!validate_record(j, trace.remapped_procs)) {
      if (mode == ParseMode::strict) {
        throw ParseError("line " + std::to_string(line_no) + ": unresolvable record (job " +
                         std::to_string(j.job_id) + " has no usable processor count or bad times)");
      }
      ++trace.skipped_lines;
      continue;
    }
    trace.jobs.push_back(j);
  }

  if (trace.jobs.empty()) throw EmptyTraceError("no valid job records in input");

  auto nodes = trace.max_nodes();
  auto procs = trace.max_procs();
  if (nodes && procs && *procs < *nodes) {
    throw ParseError("header MaxProcs (" + std::to_string(*procs) + ") < MaxNodes (" +
                     std::to_string(*nodes) + ")");
  }

  sort_jobs(trace.jobs);
  return trace;
}

WorkloadTrace load_swf(const std::string& path, ParseMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_swf(ss.str(), mode);
}

std::string serialize_swf(const WorkloadTrace& trace) {
  std::string out;
  out.reserve(trace.jobs.size() * 80 + trace.header.size() * 32);
  for (const auto& [key, value] : trace.header) {
    out += "; ";
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  }
  char buf[384];
  for (const auto& j : trace.jobs) {
    std::snprintf(buf, sizeof(buf),
                  "%lld %lld %lld %lld %d %.10g %lld %d %lld %lld %lld %lld %lld %lld %lld %lld %lld %lld\n",
                  static_cast<long long>(j.job_id), static_cast<long long>(j.submit_time),
                  static_cast<long long>(j.wait_time), static_cast<long long>(j.run_time),
                  j.used_procs, j.used_cpu_time, static_cast<long long>(j.used_memory),
                  j.requested_procs, static_cast<long long>(j.requested_time),
                  static_cast<long long>(j.requested_memory),
                  static_cast<long long>(status_to_raw(j.status)),
                  static_cast<long long>(j.user_id), static_cast<long long>(j.group_id),
                  static_cast<long long>(j.executable_id), static_cast<long long>(j.queue_id),
                  static_cast<long long>(j.partition_id),
                  static_cast<long long>(j.preceding_job_id),
                  static_cast<long long>(j.think_time));
    out += buf;
  }
  return out;
}

JobSequence slice_sequence(const WorkloadTrace& trace, std::size_t start, std::size_t count) {
  if (count == 0) throw OutOfRangeError("slice count must be positive");
  if (start + count > trace.jobs.size()) {
    throw OutOfRangeError("slice [" + std::to_string(start) + ", " + std::to_string(start + count) +
                          ") exceeds trace of " + std::to_string(trace.jobs.size()) + " jobs");
  }
  JobSequence seq(trace.jobs.begin() + start, trace.jobs.begin() + start + count);
  const std::int64_t epoch = seq.front().submit_time;
  for (auto& j : seq) j.submit_time -= epoch;
  return seq;
}

std::vector<JobSequence> sample_sequences(const WorkloadTrace& trace, std::size_t n,
                                          std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > trace.jobs.size()) {
    throw OutOfRangeError("sequence length " + std::to_string(count) + " exceeds trace of " +
                          std::to_string(trace.jobs.size()) + " jobs");
  }
  Rng rng(seed);
  const std::size_t max_start = trace.jobs.size() - count;
  std::vector<JobSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(slice_sequence(trace, rng.pick_index(max_start + 1), count));
  }
  return out;
}

WorkloadTrace synthesize_trace(const SynthesisParams& p, std::uint64_t seed) {
  if (p.jobs == 0 || p.nodes < 1 || p.mean_interarrival <= 0 || p.runtime_min < 1 ||
      p.runtime_max < p.runtime_min || p.walltime_factor < 1.0) {
    throw InvalidParamsError("synthesize_trace: all parameters must be positive and consistent");
  }

  Rng rng(seed);
  WorkloadTrace trace;
  trace.header["MaxNodes"] = std::to_string(p.nodes);
  trace.header["MaxProcs"] = std::to_string(p.nodes);

  int max_exp = 0;
  while ((1 << (max_exp + 1)) <= p.nodes) ++max_exp;

  std::int64_t clock = 0;
  for (std::size_t i = 0; i < p.jobs; ++i) {
    JobRecord j;
    j.job_id = static_cast<std::int64_t>(i + 1);
    j.submit_time = clock;
    // exponential inter-arrival, floored at 0 so bursts happen
    double gap = -p.mean_interarrival * std::log(1.0 - rng.uniform());
    clock += static_cast<std::int64_t>(gap);

    j.run_time = p.runtime_min +
                 static_cast<std::int64_t>(rng.uniform_int(
                     static_cast<std::uint64_t>(p.runtime_max - p.runtime_min + 1)));
    switch (p.size_distribution) {
      case SizeDistribution::constant_one:
        j.requested_procs = 1;
        break;
      case SizeDistribution::uniform:
        j.requested_procs = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p.nodes)));
        break;
      case SizeDistribution::power_of_two:
        j.requested_procs = 1 << rng.uniform_int(static_cast<std::uint64_t>(max_exp + 1));
        break;
    }
    j.used_procs = j.requested_procs;
    j.requested_time = static_cast<std::int64_t>(std::ceil(p.walltime_factor * static_cast<double>(j.run_time)));
    j.status = JobStatus::completed;
    j.user_id = 1 + static_cast<std::int64_t>(rng.uniform_int(16));
    j.group_id = 1;
    j.queue_id = 1;
    j.partition_id = 1;
    trace.jobs.push_back(j);
  }
  sort_jobs(trace.jobs);
  return trace;
}

namespace {

int weekday_from_header(const std::map<std::string, std::string>& header) {
  static const char* names[7] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
  auto it = header.find("StartTime");
  if (it == header.end()) return 0;
  for (int d = 0; d < 7; ++d) {
    if (it->second.find(names[d]) != std::string::npos) return d;
  }
  return 0;
}

double interp_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted.front();
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  if (lo >= sorted.size() - 1) return sorted.back();
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

TraceStats trace_statistics(const WorkloadTrace& trace, std::optional<int> epoch_weekday) {
  if (trace.jobs.empty()) throw EmptyTraceError("trace_statistics on empty trace");

  TraceStats stats;
  stats.job_count = trace.jobs.size();
  stats.node_count = trace.node_count();

  int weekday = epoch_weekday.value_or(weekday_from_header(trace.header));
  weekday = ((weekday % 7) + 7) % 7;

  int max_bucket = 0;
  for (const auto& j : trace.jobs) {
    int b = 0;
    while ((std::int64_t{1} << b) < j.requested_procs) ++b;
    max_bucket = std::max(max_bucket, b);
  }
  stats.job_size_histogram.assign(static_cast<std::size_t>(max_bucket) + 1, 0);

  std::vector<double> runtimes;
  runtimes.reserve(trace.jobs.size());
  for (const auto& j : trace.jobs) {
    int b = 0;
    while ((std::int64_t{1} << b) < j.requested_procs) ++b;
    ++stats.job_size_histogram[static_cast<std::size_t>(b)];
    ++stats.hourly_submission_counts[static_cast<std::size_t>((j.submit_time / 3600) % 24)];
    ++stats.daily_submission_counts[static_cast<std::size_t>((j.submit_time / 86400 + weekday) % 7)];
    if (j.run_time >= 0) runtimes.push_back(static_cast<double>(j.run_time));
  }

  std::sort(runtimes.begin(), runtimes.end());
  stats.runtime_quantiles = {interp_quantile(runtimes, 0.0), interp_quantile(runtimes, 0.25),
                             interp_quantile(runtimes, 0.5), interp_quantile(runtimes, 0.75),
                             interp_quantile(runtimes, 1.0)};
  return stats;
}

std::string stats_to_json(const TraceStats& stats) {
  nlohmann::json j;
  j["job_count"] = stats.job_count;
  j["node_count"] = stats.node_count;
  j["job_size_histogram"] = stats.job_size_histogram;
  j["hourly_submission_counts"] = stats.hourly_submission_counts;
  j["daily_submission_counts"] = stats.daily_submission_counts;
  j["runtime_quantiles"] = {{"min", stats.runtime_quantiles[0]},
                            {"q25", stats.runtime_quantiles[1]},
                            {"median", stats.runtime_quantiles[2]},
                            {"q75", stats.runtime_quantiles[3]},
                            {"max", stats.runtime_quantiles[4]}};
  return j.dump(2);
}

std::string stats_to_csv(const TraceStats& stats) {
  std::string out = "key,index,value\n";
  auto row = [&out](const std::string& key, std::size_t index, double value) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.12g\n", key.c_str(), index, value);
    out += buf;
  };
  row("job_count", 0, static_cast<double>(stats.job_count));
  row("node_count", 0, static_cast<double>(stats.node_count));
  for (std::size_t b = 0; b < stats.job_size_histogram.size(); ++b)
    row("job_size_bucket", b, static_cast<double>(stats.job_size_histogram[b]));
  for (std::size_t h = 0; h < 24; ++h)
    row("hourly_submissions", h, static_cast<double>(stats.hourly_submission_counts[h]));
  for (std::size_t d = 0; d < 7; ++d)
    row("daily_submissions", d, static_cast<double>(stats.daily_submission_counts[d]));
  for (std::size_t q = 0; q < 5; ++q) row("runtime_quantile", q, stats.runtime_quantiles[q]);
  return out;
}

std::uint64_t sequence_hash(const JobSequence& seq) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(v >> (b * 8)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& j : seq) {
    mix(j.job_id);
    mix(j.submit_time);
    mix(j.run_time);
    mix(j.requested_procs);
    mix(j.requested_time);
  }
  return h;
}

}  // namespace schedforge

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace schedforge {

// Job completion status, column 11 of the SWF record.
// Raw values 2/3/4 (partial executions) are folded into unknown.
enum class JobStatus { failed = 0, completed = 1, cancelled = 5, unknown = -1 };

// One SWF job record. Field order follows the 18 SWF columns; -1 marks an
// unknown value throughout. After validation requested_procs >= 1 always.
struct JobRecord {
  std::int64_t job_id = -1;            //  1
  std::int64_t submit_time = 0;        //  2 seconds since trace epoch
  std::int64_t wait_time = -1;         //  3
  std::int64_t run_time = -1;          //  4 actual e_j
  int used_procs = -1;                 //  5
  double used_cpu_time = -1.0;         //  6 average cpu seconds, may be fractional
  std::int64_t used_memory = -1;       //  7 KB
  int requested_procs = -1;            //  8
  std::int64_t requested_time = -1;    //  9 user walltime estimate
  std::int64_t requested_memory = -1;  // 10 KB
  JobStatus status = JobStatus::unknown;  // 11
  std::int64_t user_id = -1;           // 12
  std::int64_t group_id = -1;          // 13
  std::int64_t executable_id = -1;     // 14
  std::int64_t queue_id = -1;          // 15
  std::int64_t partition_id = -1;      // 16
  std::int64_t preceding_job_id = -1;  // 17
  std::int64_t think_time = -1;        // 18

  bool operator==(const JobRecord&) const = default;
};

struct WorkloadTrace {
  std::map<std::string, std::string> header;  // directives from ';'-prefixed lines
  std::vector<JobRecord> jobs;                // sorted by (submit_time, job_id)
  std::size_t skipped_lines = 0;              // lenient-mode rejects
  std::size_t remapped_procs = 0;             // requested_procs filled from used_procs

  std::optional<int> max_nodes() const;
  std::optional<int> max_procs() const;
  // MaxNodes if present, else MaxProcs, else the largest requested_procs.
  int node_count() const;
  // MaxProcs / MaxNodes when both known, floored at 1.
  int procs_per_node() const;
};

using JobSequence = std::vector<JobRecord>;

enum class ParseMode { lenient, strict };

// Parses SWF text. Lines starting with ';' are header directives or
// comments, data lines carry the 18 whitespace-separated numeric columns.
// Lenient mode skips malformed or unresolvable lines and counts them;
// strict mode throws MissingFieldsError / NonNumericFieldError instead.
// Throws EmptyTraceError when no job survives.
WorkloadTrace parse_swf(std::string_view text, ParseMode mode = ParseMode::lenient);
WorkloadTrace load_swf(const std::string& path, ParseMode mode = ParseMode::lenient);

// Emits a trace as SWF text; parse_swf(serialize_swf(t)) == t field-wise.
std::string serialize_swf(const WorkloadTrace& trace);

// Contiguous subsequence of `count` jobs starting at `start`, submit times
// re-based so the first job submits at t=0. Throws OutOfRangeError.
JobSequence slice_sequence(const WorkloadTrace& trace, std::size_t start, std::size_t count);

// n slices of `count` jobs at uniformly sampled start offsets.
std::vector<JobSequence> sample_sequences(const WorkloadTrace& trace, std::size_t n,
                                          std::size_t count, std::uint64_t seed);

enum class SizeDistribution { constant_one, uniform, power_of_two };

struct SynthesisParams {
  std::size_t jobs = 0;
  int nodes = 0;
  double mean_interarrival = 0.0;            // seconds, exponential gaps
  std::int64_t runtime_min = 0;              // inclusive
  std::int64_t runtime_max = 0;              // inclusive
  SizeDistribution size_distribution = SizeDistribution::power_of_two;
  double walltime_factor = 2.0;              // requested_time = ceil(factor * run_time)
};

// Deterministic synthetic workload; output always satisfies parse-time
// validation and requested_time >= run_time. Throws InvalidParamsError.
WorkloadTrace synthesize_trace(const SynthesisParams& params, std::uint64_t seed);

struct TraceStats {
  std::size_t job_count = 0;
  int node_count = 0;
  // bucket 0 holds size 1, bucket b>0 holds sizes in (2^(b-1), 2^b]
  std::vector<std::size_t> job_size_histogram;
  std::array<std::size_t, 24> hourly_submission_counts{};
  std::array<std::size_t, 7> daily_submission_counts{};  // 0 = Monday
  std::array<double, 5> runtime_quantiles{};             // min, q25, median, q75, max
};

// Histograms over a non-empty trace. The weekday of trace epoch defaults to
// the SWF StartTime header when parseable, else Monday; `epoch_weekday`
// overrides (0 = Monday .. 6 = Sunday). Throws EmptyTraceError.
TraceStats trace_statistics(const WorkloadTrace& trace,
                            std::optional<int> epoch_weekday = std::nullopt);

std::string stats_to_json(const TraceStats& stats);
std::string stats_to_csv(const TraceStats& stats);

// FNV-1a over the scheduling-relevant job fields; used to assert that every
// scheduler in one evaluation saw identical sequences.
std::uint64_t sequence_hash(const JobSequence& seq);

}  // namespace schedforge

#pragma once

// Human annotation service: SP/LP labels per repair record, calibration
// rounds over a seeded subset, pairwise kappa gating, and the HTTP API.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mend/harness.hpp"
#include "mend/metrics.hpp"
#include "mend/stats.hpp"

namespace mend::annosvc {

class AnnoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ValidationError : public AnnoError {
 public:
  using AnnoError::AnnoError;
};
class UnknownAnnotator : public AnnoError {
 public:
  using AnnoError::AnnoError;
};
class UnknownRecord : public AnnoError {
 public:
  using AnnoError::AnnoError;
};
class RoundClosed : public AnnoError {
 public:
  using AnnoError::AnnoError;
};
class NoOverlap : public AnnoError {
 public:
  using AnnoError::AnnoError;
};

struct Annotation {
  std::string record_id;
  std::string annotator_id;
  int sp = 0;
  int lp = 0;
  int round = 1;
  std::string noted_at;
  std::optional<std::string> comment;
};

nlohmann::json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

class DuplicateAnnotation : public AnnoError {
 public:
  explicit DuplicateAnnotation(Annotation existing);
  const Annotation& existing() const { return existing_; }

 private:
  Annotation existing_;
};

struct Annotator {
  std::string id;
  std::string token;
};

struct ServiceConfig {
  std::filesystem::path records_dir;
  std::vector<Annotator> annotators;
  double calibration_fraction = 0.10;
  double kappa_threshold = 0.80;
  std::uint64_t seed = 0;
};

/// annotators.json: {"annotators": [{"id", "token"}], "calibration_fraction",
/// "kappa_threshold", "seed"}; only "annotators" is required.
ServiceConfig load_service_config(const std::filesystem::path& records_dir, const std::filesystem::path& annotators_file);

enum class RoundKind { calibration, full };
std::string_view to_string(RoundKind k);

struct Round {
  int number = 1;
  RoundKind kind = RoundKind::calibration;
  // Indices into the annotatable record list, ascending.
  std::vector<std::size_t> pool;
  bool closed = false;
  std::optional<bool> gate_passed;
  std::string codebook;
};

struct PairKappa {
  std::string a;
  std::string b;
  std::size_t overlap = 0;
  stats::KappaResult sp;
  stats::KappaResult lp;
};

struct RoundStatus {
  int round = 1;
  RoundKind kind = RoundKind::calibration;
  double calibration_fraction = 0.10;
  double threshold = 0.80;
  std::vector<PairKappa> pairs;
  // Every pairwise kappa, for both labels, strictly above the threshold.
  bool gate_passed = false;
};

nlohmann::json to_json(const RoundStatus& s);

struct RepairTask {
  std::string record_id;
  std::size_t index = 0;
  int round = 1;
  std::string original_source;
  std::string repaired_source;
  bool compiled = false;
  std::string backend;
  std::vector<metrics::DiffSpan> diff;
  std::optional<metrics::SpAuto> sp_auto;
  std::optional<metrics::LpAuto> lp_auto;
  std::size_t done = 0;
  std::size_t total = 0;
};

nlohmann::json to_json(const RepairTask& t);

/// Calibration pool size: ceil(fraction * n), at least 1 when n > 0.
std::size_t calibration_pool_size(std::size_t n, double fraction);

/// Pairwise kappa over items labelled by both members of each pair.
/// Throws NoOverlap when no pair shares an item.
RoundStatus compute_agreement(const std::vector<Annotation>& annotations, int round, double threshold);

/// Majority label per record from the latest round that labelled it; a tie
/// on either label leaves the record out so reports fall back to auto.
std::map<std::string, harness::HumanLabel> consensus_labels(const std::vector<Annotation>& annotations);

/// Complete lines of annotations.jsonl in `dir`.
std::vector<Annotation> load_annotations(const std::filesystem::path& dir);

inline constexpr const char* kRoundsFile = "rounds.jsonl";

/// Annotation state over an experiment store. Writes are serialized; reads
/// take an immutable snapshot.
class Service {
 public:
  explicit Service(ServiceConfig config);

  const ServiceConfig& config() const { return config_; }

  /// Annotator owning `token`, if any.
  std::optional<std::string> authenticate(const std::string& token) const;

  /// nullopt means the annotator has finished the round's pool.
  std::optional<RepairTask> next_task(const std::string& annotator, int round) const;
  Annotation submit(Annotation a);
  RoundStatus agreement(int round) const;
  /// Closes the round, records the gate outcome, and opens the next one: a
  /// fresh calibration pool after a failed gate, the full set after a pass.
  Round close_round(int round, const std::string& codebook = {});

  nlohmann::json progress() const;
  nlohmann::json record_view(const std::string& record_id) const;
  std::vector<Round> rounds() const;
  std::vector<Annotation> annotations() const;

 private:
  struct Snapshot {
    std::vector<Round> rounds;
    std::vector<Annotation> annotations;
  };

  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(std::shared_ptr<const Snapshot> next);
  const Round& find_round(const Snapshot& s, int round) const;
  Round open_round(const std::vector<Round>& previous, int number, RoundKind kind) const;
  void append_line(const char* file, const nlohmann::json& line);
  void check_annotator(const std::string& id) const;

  ServiceConfig config_;
  std::vector<harness::RepairRecord> records_;  // annotatable, store order
  std::map<std::string, std::size_t> record_index_;
  std::map<std::string, std::string> originals_;  // submission id -> source

  std::mutex write_mu_;
  mutable std::shared_mutex snap_mu_;
  std::shared_ptr<const Snapshot> snap_;
};

/// HTTP front end. Every /api route requires X-Annotator-Token.
class Server {
 public:
  Server(Service& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mend::annosvc

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "mend/annosvc.hpp"
#include "mend/corpus.hpp"

namespace mend::annosvc {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnnoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Complete lines only; a torn tail is cut off the file when `repair` is set.
std::vector<json> read_jsonl(const fs::path& path, bool repair) {
  std::vector<json> out;
  if (!fs::exists(path)) return out;
  const std::string text = read_file(path);
  const std::size_t last = text.rfind('\n');
  const std::size_t keep = last == std::string::npos ? 0 : last + 1;
  if (repair && keep < text.size()) fs::resize_file(path, keep);
  std::istringstream in(text.substr(0, keep));
  std::size_t row = 0;
  for (std::string line; std::getline(in, line);) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw AnnoError(path.filename().string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

RoundKind parse_round_kind(const std::string& s) {
  if (s == "calibration") return RoundKind::calibration;
  if (s == "full") return RoundKind::full;
  throw AnnoError("unknown round kind: " + s);
}

json kappa_json(const stats::KappaResult& k) {
  return {{"kappa", k.kappa},
          {"observed_agreement", k.observed_agreement},
          {"expected_agreement", k.expected_agreement},
          {"n", k.n},
          {"degenerate", k.degenerate}};
}

}  // namespace

std::string_view to_string(RoundKind k) { return k == RoundKind::calibration ? "calibration" : "full"; }

json to_json(const Annotation& a) {
  json j = {{"record_id", a.record_id}, {"annotator_id", a.annotator_id}, {"sp", a.sp},
            {"lp", a.lp},               {"round", a.round},               {"noted_at", a.noted_at}};
  j["comment"] = a.comment ? json(*a.comment) : json(nullptr);
  return j;
}

Annotation annotation_from_json(const json& j) {
  Annotation a;
  try {
    a.record_id = j.at("record_id").get<std::string>();
    a.annotator_id = j.at("annotator_id").get<std::string>();
    a.sp = j.at("sp").get<int>();
    a.lp = j.at("lp").get<int>();
    a.round = j.value("round", 1);
    a.noted_at = j.value("noted_at", std::string());
    if (auto it = j.find("comment"); it != j.end() && !it->is_null()) a.comment = it->get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid annotation: ") + e.what());
  }
  return a;
}

DuplicateAnnotation::DuplicateAnnotation(Annotation existing)
    : AnnoError("record " + existing.record_id + " already annotated by " + existing.annotator_id + " in round " +
                std::to_string(existing.round)),
      existing_(std::move(existing)) {}

json to_json(const RoundStatus& s) {
  json pairs = json::array();
  for (const auto& p : s.pairs) {
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"overlap", p.overlap}, {"sp", kappa_json(p.sp)}, {"lp", kappa_json(p.lp)}});
  }
  return {{"round", s.round},
          {"kind", to_string(s.kind)},
          {"calibration_fraction", s.calibration_fraction},
          {"threshold", s.threshold},
          {"pairs", pairs},
          {"gate_passed", s.gate_passed}};
}

json to_json(const RepairTask& t) {
  json diff = json::array();
  for (const auto& d : t.diff) diff.push_back({{"op", metrics::to_string(d.op)}, {"text", d.text}});
  return {{"record_id", t.record_id},
          {"index", t.index},
          {"round", t.round},
          {"original_source", t.original_source},
          {"repaired_source", t.repaired_source},
          {"compiled", t.compiled},
          {"backend", t.backend},
          {"diff", diff},
          {"sp_auto", t.sp_auto ? json(metrics::to_string(*t.sp_auto)) : json(nullptr)},
          {"lp_auto", t.lp_auto ? json(metrics::to_string(*t.lp_auto)) : json(nullptr)},
          {"progress", {{"done", t.done}, {"total", t.total}}}};
}

std::size_t calibration_pool_size(std::size_t n, double fraction) {
  if (n == 0) return 0;
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("calibration fraction must be in (0, 1]");
  // Guard against 0.1 * 600 landing just above 60.
  const double raw = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

RoundStatus compute_agreement(const std::vector<Annotation>& annotations, int round, double threshold) {
  // annotator -> record -> labels
  std::map<std::string, std::map<std::string, std::pair<int, int>>> by_annotator;
  for (const auto& a : annotations)
    if (a.round == round) by_annotator[a.annotator_id][a.record_id] = {a.sp, a.lp};

  RoundStatus status;
  status.round = round;
  status.threshold = threshold;
  for (auto i = by_annotator.begin(); i != by_annotator.end(); ++i) {
    for (auto j = std::next(i); j != by_annotator.end(); ++j) {
      std::vector<int> sp_a, sp_b, lp_a, lp_b;
      for (const auto& [record, labels] : i->second) {
        auto other = j->second.find(record);
        if (other == j->second.end()) continue;
        sp_a.push_back(labels.first);
        lp_a.push_back(labels.second);
        sp_b.push_back(other->second.first);
        lp_b.push_back(other->second.second);
      }
      if (sp_a.empty()) continue;
      PairKappa p;
      p.a = i->first;
      p.b = j->first;
      p.overlap = sp_a.size();
      p.sp = stats::cohen_kappa(sp_a, sp_b);
      p.lp = stats::cohen_kappa(lp_a, lp_b);
      status.pairs.push_back(std::move(p));
    }
  }
  if (status.pairs.empty()) throw NoOverlap("round " + std::to_string(round) + ": no two annotators share an item");
  status.gate_passed = std::all_of(status.pairs.begin(), status.pairs.end(), [&](const PairKappa& p) {
    return p.sp.kappa > threshold && p.lp.kappa > threshold;
  });
  return status;
}

std::map<std::string, harness::HumanLabel> consensus_labels(const std::vector<Annotation>& annotations) {
  std::map<std::string, int> latest;
  for (const auto& a : annotations) latest[a.record_id] = std::max(latest[a.record_id], a.round);

  struct Votes {
    int sp1 = 0, sp0 = 0, lp1 = 0, lp0 = 0;
  };
  std::map<std::string, Votes> votes;
  for (const auto& a : annotations) {
    if (a.round != latest[a.record_id]) continue;
    auto& v = votes[a.record_id];
    ++(a.sp ? v.sp1 : v.sp0);
    ++(a.lp ? v.lp1 : v.lp0);
  }
  std::map<std::string, harness::HumanLabel> out;
  for (const auto& [id, v] : votes) {
    if (v.sp1 == v.sp0 || v.lp1 == v.lp0) continue;
    out[id] = {v.sp1 > v.sp0 ? 1 : 0, v.lp1 > v.lp0 ? 1 : 0};
  }
  return out;
}

std::vector<Annotation> load_annotations(const fs::path& dir) {
  std::vector<Annotation> out;
  for (const auto& j : read_jsonl(dir / harness::kAnnotationsFile, false)) out.push_back(annotation_from_json(j));
  return out;
}

ServiceConfig load_service_config(const fs::path& records_dir, const fs::path& annotators_file) {
  ServiceConfig c;
  c.records_dir = records_dir;
  try {
    const json doc = json::parse(read_file(annotators_file));
    for (const auto& a : doc.at("annotators")) {
      Annotator ann{a.at("id").get<std::string>(), a.at("token").get<std::string>()};
      if (ann.id.empty() || ann.token.empty()) throw AnnoError("annotator id and token must be non-empty");
      for (const auto& prev : c.annotators) {
        if (prev.id == ann.id) throw AnnoError("duplicate annotator id '" + ann.id + "'");
        if (prev.token == ann.token) throw AnnoError("annotators " + prev.id + " and " + ann.id + " share a token");
      }
      c.annotators.push_back(std::move(ann));
    }
    c.calibration_fraction = doc.value("calibration_fraction", 0.10);
    c.kappa_threshold = doc.value("kappa_threshold", 0.80);
    c.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw AnnoError(annotators_file.string() + ": " + e.what());
  }
  if (c.annotators.empty()) throw AnnoError(annotators_file.string() + ": no annotators configured");
  return c;
}

// ---------------------------------------------------------------------------

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  calibration_pool_size(1, config_.calibration_fraction);  // validates the fraction
  for (auto& r : harness::load_records(config_.records_dir)) {
    if (!r.repaired_source) continue;
    record_index_[r.id] = records_.size();
    records_.push_back(std::move(r));
  }
  for (auto& s : harness::load_sample(config_.records_dir)) originals_[s.id] = std::move(s.source);

  auto snap = std::make_shared<Snapshot>();
  for (const auto& j : read_jsonl(config_.records_dir / harness::kAnnotationsFile, true)) {
    snap->annotations.push_back(annotation_from_json(j));
  }
  for (const auto& j : read_jsonl(config_.records_dir / kRoundsFile, true)) {
    const std::string event = j.at("event").get<std::string>();
    const int number = j.at("round").get<int>();
    if (event == "open") {
      Round r;
      r.number = number;
      r.kind = parse_round_kind(j.at("kind").get<std::string>());
      for (const auto& id : j.at("pool")) {
        auto it = record_index_.find(id.get<std::string>());
        if (it == record_index_.end()) throw AnnoError("rounds: pool names unknown record " + id.get<std::string>());
        r.pool.push_back(it->second);
      }
      std::sort(r.pool.begin(), r.pool.end());
      snap->rounds.push_back(std::move(r));
    } else if (event == "close") {
      for (auto& r : snap->rounds) {
        if (r.number != number) continue;
        r.closed = true;
        if (j.contains("gate_passed") && !j["gate_passed"].is_null()) r.gate_passed = j["gate_passed"].get<bool>();
        r.codebook = j.value("codebook", std::string());
      }
    }
  }
  if (snap->rounds.empty() && !records_.empty()) {
    Round first = open_round({}, 1, RoundKind::calibration);
    json pool = json::array();
    for (auto i : first.pool) pool.push_back(records_[i].id);
    append_line(kRoundsFile, {{"event", "open"}, {"round", 1}, {"kind", "calibration"}, {"pool", pool}});
    snap->rounds.push_back(std::move(first));
  }
  snap_ = std::move(snap);
}

std::shared_ptr<const Service::Snapshot> Service::snapshot() const {
  std::shared_lock lock(snap_mu_);
  return snap_;
}

void Service::publish(std::shared_ptr<const Snapshot> next) {
  std::unique_lock lock(snap_mu_);
  snap_ = std::move(next);
}

void Service::append_line(const char* file, const json& line) {
  const fs::path path = config_.records_dir / file;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw AnnoError("write failed: " + path.string());
}

void Service::check_annotator(const std::string& id) const {
  const bool known = std::any_of(config_.annotators.begin(), config_.annotators.end(),
                                 [&](const Annotator& a) { return a.id == id; });
  if (!known) throw UnknownAnnotator("unknown annotator '" + id + "'");
}

std::optional<std::string> Service::authenticate(const std::string& token) const {
  if (token.empty()) return std::nullopt;
  for (const auto& a : config_.annotators)
    if (a.token == token) return a.id;
  return std::nullopt;
}

const Round& Service::find_round(const Snapshot& s, int round) const {
  for (const auto& r : s.rounds)
    if (r.number == round) return r;
  throw ValidationError("round " + std::to_string(round) + " does not exist");
}

Round Service::open_round(const std::vector<Round>& previous, int number, RoundKind kind) const {
  Round r;
  r.number = number;
  r.kind = kind;
  if (kind == RoundKind::full) {
    for (std::size_t i = 0; i < records_.size(); ++i) r.pool.push_back(i);
    return r;
  }
  // Prefer records no earlier calibration pool used.
  std::set<std::size_t> used;
  for (const auto& p : previous)
    if (p.kind == RoundKind::calibration) used.insert(p.pool.begin(), p.pool.end());
  std::vector<std::size_t> fresh, reused;
  for (std::size_t i = 0; i < records_.size(); ++i) (used.count(i) ? reused : fresh).push_back(i);

  const std::size_t k = calibration_pool_size(records_.size(), config_.calibration_fraction);
  const std::uint64_t seed = config_.seed + static_cast<std::uint64_t>(number);
  for (auto* group : {&fresh, &reused}) {
    const auto perm = corpus::seeded_permutation(group->size(), seed);
    for (std::size_t i = 0; i < perm.size() && r.pool.size() < k; ++i) r.pool.push_back((*group)[perm[i]]);
  }
  std::sort(r.pool.begin(), r.pool.end());
  return r;
}

std::optional<RepairTask> Service::next_task(const std::string& annotator, int round) const {
  check_annotator(annotator);
  const auto snap = snapshot();
  const Round& r = find_round(*snap, round);
  if (r.closed) throw RoundClosed("round " + std::to_string(round) + " is closed");

  std::set<std::string> mine;
  for (const auto& a : snap->annotations)
    if (a.round == round && a.annotator_id == annotator) mine.insert(a.record_id);

  for (std::size_t idx : r.pool) {
    const auto& rec = records_[idx];
    if (mine.count(rec.id)) continue;
    RepairTask t;
    t.record_id = rec.id;
    t.index = idx;
    t.round = round;
    if (auto it = originals_.find(rec.submission_id); it != originals_.end()) t.original_source = it->second;
    t.repaired_source = *rec.repaired_source;
    t.compiled = rec.compiled();
    if (rec.diagnostics) t.backend = compilecheck::to_string(rec.diagnostics->backend);
    t.diff = metrics::char_diff(t.original_source, t.repaired_source);
    if (rec.metrics) {
      t.sp_auto = rec.metrics->sp_auto;
      t.lp_auto = rec.metrics->lp_auto;
    }
    t.done = mine.size();
    t.total = r.pool.size();
    return t;
  }
  return std::nullopt;
}

Annotation Service::submit(Annotation a) {
  check_annotator(a.annotator_id);
  if (a.sp != 0 && a.sp != 1) throw ValidationError("sp must be 0 or 1");
  if (a.lp != 0 && a.lp != 1) throw ValidationError("lp must be 0 or 1");
  if (a.round < 1) throw ValidationError("round must be >= 1");
  auto it = record_index_.find(a.record_id);
  if (it == record_index_.end()) throw UnknownRecord("unknown record '" + a.record_id + "'");

  std::lock_guard write(write_mu_);
  const auto snap = snapshot();
  const Round& r = find_round(*snap, a.round);
  if (r.closed) throw RoundClosed("round " + std::to_string(a.round) + " is closed");
  if (!std::binary_search(r.pool.begin(), r.pool.end(), it->second)) {
    throw ValidationError("record " + a.record_id + " is not in round " + std::to_string(a.round));
  }
  for (const auto& prev : snap->annotations) {
    if (prev.record_id == a.record_id && prev.annotator_id == a.annotator_id && prev.round == a.round) {
      throw DuplicateAnnotation(prev);
    }
  }
  a.noted_at = utc_now();
  append_line(harness::kAnnotationsFile, to_json(a));
  auto next = std::make_shared<Snapshot>(*snap);
  next->annotations.push_back(a);
  publish(std::move(next));
  return a;
}

RoundStatus Service::agreement(int round) const {
  const auto snap = snapshot();
  const Round& r = find_round(*snap, round);
  RoundStatus s = compute_agreement(snap->annotations, round, config_.kappa_threshold);
  s.kind = r.kind;
  s.calibration_fraction = config_.calibration_fraction;
  return s;
}

Round Service::close_round(int round, const std::string& codebook) {
  std::lock_guard write(write_mu_);
  const auto snap = snapshot();
  const Round& r = find_round(*snap, round);
  if (r.closed) throw RoundClosed("round " + std::to_string(round) + " is already closed");

  std::optional<bool> gate;
  if (r.kind == RoundKind::calibration) {
    gate = compute_agreement(snap->annotations, round, config_.kappa_threshold).gate_passed;
  } else {
    try {
      gate = compute_agreement(snap->annotations, round, config_.kappa_threshold).gate_passed;
    } catch (const NoOverlap&) {
    }
  }
  append_line(kRoundsFile, {{"event", "close"},
                            {"round", round},
                            {"gate_passed", gate ? json(*gate) : json(nullptr)},
                            {"codebook", codebook}});
  auto next = std::make_shared<Snapshot>(*snap);
  for (auto& x : next->rounds) {
    if (x.number != round) continue;
    x.closed = true;
    x.gate_passed = gate;
    x.codebook = codebook;
  }
  Round closed = find_round(*next, round);
  if (r.kind == RoundKind::calibration) {
    const int number = std::max_element(next->rounds.begin(), next->rounds.end(), [](const Round& a, const Round& b) {
                         return a.number < b.number;
                       })->number + 1;
    Round opened = open_round(next->rounds, number, *gate ? RoundKind::full : RoundKind::calibration);
    json pool = json::array();
    for (auto i : opened.pool) pool.push_back(records_[i].id);
    append_line(kRoundsFile,
                {{"event", "open"}, {"round", number}, {"kind", to_string(opened.kind)}, {"pool", pool}});
    next->rounds.push_back(std::move(opened));
  }
  publish(std::move(next));
  return closed;
}

json Service::progress() const {
  const auto snap = snapshot();
  json rounds = json::array();
  for (const auto& r : snap->rounds) {
    json per = json::object();
    for (const auto& ann : config_.annotators) per[ann.id] = 0;
    for (const auto& a : snap->annotations)
      if (a.round == r.number) per[a.annotator_id] = per.value(a.annotator_id, 0) + 1;
    rounds.push_back({{"round", r.number},
                      {"kind", to_string(r.kind)},
                      {"closed", r.closed},
                      {"gate_passed", r.gate_passed ? json(*r.gate_passed) : json(nullptr)},
                      {"pool_size", r.pool.size()},
                      {"annotated", per}});
  }
  return {{"records", records_.size()}, {"annotations", snap->annotations.size()}, {"rounds", rounds}};
}

json Service::record_view(const std::string& record_id) const {
  auto it = record_index_.find(record_id);
  if (it == record_index_.end()) throw UnknownRecord("unknown record '" + record_id + "'");
  const auto& rec = records_[it->second];
  const auto snap = snapshot();
  json out = harness::to_json(rec);
  std::string original;
  if (auto o = originals_.find(rec.submission_id); o != originals_.end()) original = o->second;
  out["original_source"] = original;
  json diff = json::array();
  for (const auto& d : metrics::char_diff(original, *rec.repaired_source)) {
    diff.push_back({{"op", metrics::to_string(d.op)}, {"text", d.text}});
  }
  out["diff"] = diff;
  json anns = json::array();
  for (const auto& a : snap->annotations)
    if (a.record_id == record_id) anns.push_back(to_json(a));
  out["annotations"] = anns;
  return out;
}

std::vector<Round> Service::rounds() const { return snapshot()->rounds; }
std::vector<Annotation> Service::annotations() const { return snapshot()->annotations; }

}  // namespace mend::annosvc

#include <atomic>
#include <condition_variable>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "mend/harness.hpp"

namespace mend::harness {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Cuts a trailing fragment left by a killed writer.
void drop_torn_tail(const fs::path& path) {
  if (!fs::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty() || text.back() == '\n') return;
  const std::size_t eol = text.rfind('\n');
  fs::resize_file(path, eol == std::string::npos ? 0 : eol + 1);
}

void write_sample(const fs::path& dir, const std::vector<corpus::Submission>& sample) {
  const fs::path tmp = dir / (std::string(kSampleFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw HarnessError("cannot write " + tmp.string());
    for (const auto& s : sample) out << to_json(s).dump() << '\n';
    if (!out) throw HarnessError("write failed: " + tmp.string());
  }
  fs::rename(tmp, dir / kSampleFile);
}

class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : interval_(per_second > 0 ? std::chrono::duration_cast<Clock::duration>(
                                       std::chrono::duration<double>(1.0 / per_second))
                                 : Clock::duration::zero()) {}

  void acquire() {
    if (interval_ == Clock::duration::zero()) return;
    Clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = Clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  Clock::duration interval_;
  std::mutex mu_;
  Clock::time_point next_{};
};

struct Inputs {
  std::vector<corpus::Submission> sample;
  std::map<std::string, corpus::Problem> problems;
  agents::PromptTemplates templates;
};

Inputs load_inputs(const ExperimentConfig& config, bool from_store) {
  Inputs in;
  in.problems = corpus::load_problems(config.problems_path);
  in.templates = config.templates_dir ? agents::PromptTemplates::load(*config.templates_dir)
                                      : agents::PromptTemplates::defaults();
  if (from_store) {
    in.sample = load_sample(config.output_dir);
    if (in.sample.empty()) throw HarnessError("no stored sample in " + config.output_dir.string());
    return in;
  }
  const corpus::Corpus corp = corpus::ingest(config.corpus_path);
  corpus::SampleOptions opts;
  opts.problem_ids = config.problem_ids;
  opts.n = config.sample_n;
  opts.seed = config.sample_seed;
  opts.stratified = config.stratified;
  opts.check = config.compile;
  in.sample = corpus::sample_uncompilable(corp, opts);
  return in;
}

const corpus::Problem* find_problem(const Inputs& in, const std::string& id) {
  auto it = in.problems.find(id);
  return it == in.problems.end() ? nullptr : &it->second;
}

compilecheck::CompilerDiagnostics check_or_timeout(const std::string& source, const compilecheck::CheckOptions& opts) {
  try {
    return compilecheck::check(source, opts);
  } catch (const compilecheck::CompilerTimeout& e) {
    compilecheck::CompilerDiagnostics d;
    d.backend = opts.backend;
    d.messages.push_back({1, 0, compilecheck::Severity::error, e.what()});
    return d;
  }
}

struct Task {
  std::size_t submission;
  std::size_t agent;
  agents::ContextLevel level;
  std::string id;
  agents::PromptBundle prompt;
};

}  // namespace

std::shared_ptr<agents::AgentEndpoint> make_endpoint(const AgentSpec& spec) {
  if (spec.kind == "http") {
    auto cfg = spec.http;
    cfg.id = spec.id;
    return std::make_shared<agents::HttpChatEndpoint>(cfg);
  }
  if (spec.kind != "mock") throw HarnessError("unknown agent kind '" + spec.kind + "'");
  if (spec.behavior == agents::MockBehavior::scripted) {
    return std::make_shared<agents::MockEndpoint>(spec.id, agents::MockEndpoint::load_script(spec.script));
  }
  return std::make_shared<agents::MockEndpoint>(spec.id, spec.behavior);
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  fs::create_directories(config.output_dir);
  const fs::path records_path = config.output_dir / kRecordsFile;

  Inputs in = load_inputs(config, false);
  const auto stored = load_sample(config.output_dir);
  if (!stored.empty() && stored != in.sample) {
    throw HarnessError("sample drawn from the config differs from " + (config.output_dir / kSampleFile).string() +
                       "; use a fresh output directory");
  }
  if (stored.empty()) write_sample(config.output_dir, in.sample);

  drop_torn_tail(records_path);
  std::set<std::string> done;
  for (const auto& r : load_records(config.output_dir)) done.insert(r.id);

  ExperimentSummary summary;
  summary.sampled = in.sample.size();
  summary.conditions = config.agents.size() * config.contexts.size();
  summary.planned = summary.sampled * summary.conditions;

  // Diagnostics of each original, needed by high-context prompts.
  std::vector<compilecheck::CompilerDiagnostics> original_diag;
  original_diag.reserve(in.sample.size());
  for (const auto& s : in.sample) original_diag.push_back(check_or_timeout(s.source, config.compile));

  std::vector<Task> tasks;
  for (std::size_t si = 0; si < in.sample.size(); ++si) {
    const auto& sub = in.sample[si];
    for (std::size_t ai = 0; ai < config.agents.size(); ++ai) {
      for (auto level : config.contexts) {
        std::string id = record_id(sub.id, config.agents[ai].id, level);
        if (done.count(id)) {
          ++summary.skipped_existing;
          continue;
        }
        agents::PromptBundle prompt;
        try {
          prompt = agents::build_prompt(sub, find_problem(in, sub.problem_id), &original_diag[si], level,
                                        in.templates);
        } catch (const agents::PromptError& e) {
          throw HarnessError("submission " + sub.id + " (problem " + sub.problem_id + "): " + e.what());
        }
        tasks.push_back({si, ai, level, std::move(id), std::move(prompt)});
      }
    }
  }
  if (config.stop_after && *config.stop_after < tasks.size()) {
    tasks.resize(*config.stop_after);
    summary.interrupted = true;
  }

  std::vector<std::shared_ptr<agents::AgentEndpoint>> endpoints;
  std::vector<std::unique_ptr<RateLimiter>> limiters;
  for (const auto& spec : config.agents) {
    endpoints.push_back(make_endpoint(spec));
    limiters.push_back(std::make_unique<RateLimiter>(spec.max_requests_per_second));
  }

  std::ofstream out(records_path, std::ios::binary | std::ios::app);
  if (!out) throw HarnessError("cannot open " + records_path.string());

  // Workers finish out of order; a reorder buffer keeps appends in task order.
  std::mutex mu;
  std::map<std::size_t, RepairRecord> pending;
  std::size_t next_write = 0;
  std::atomic<std::size_t> next_task{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;

  auto process = [&](const Task& t) {
    const auto& sub = in.sample[t.submission];
    const auto& spec = config.agents[t.agent];
    RepairRecord r;
    r.id = t.id;
    r.submission_id = sub.id;
    r.problem_id = sub.problem_id;
    r.agent_id = spec.id;
    r.context = t.level;
    r.prompt_hash = agents::prompt_hash(t.prompt);

    agents::RunOptions opts;
    opts.max_retries = spec.max_retries;
    opts.initial_backoff = std::chrono::milliseconds(spec.initial_backoff_ms);
    limiters[t.agent]->acquire();
    const auto reply = agents::run_agent(t.prompt, *endpoints[t.agent], opts);
    r.attempts = reply.attempts;
    r.latency_ms = reply.latency_ms;
    r.failure = reply.failure;
    r.failure_message = reply.error_message;
    if (reply.repaired_source) {
      r.repaired_source = reply.repaired_source;
      r.diagnostics = check_or_timeout(*reply.repaired_source, config.compile);
      r.metrics = metrics::compute(sub.source, *reply.repaired_source, r.diagnostics->ok);
    }
    r.created_at = utc_now();
    return r;
  };

  auto worker = [&] {
    while (!abort) {
      const std::size_t i = next_task++;
      if (i >= tasks.size()) return;
      try {
        RepairRecord r = process(tasks[i]);
        std::lock_guard lock(mu);
        pending.emplace(i, std::move(r));
        for (auto it = pending.find(next_write); it != pending.end(); it = pending.find(next_write)) {
          out << to_json(it->second).dump() << '\n';
          out.flush();
          if (!out) throw HarnessError("write failed: " + records_path.string());
          ++summary.written;
          if (it->second.failure) ++summary.agent_failures;
          pending.erase(it);
          ++next_write;
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        abort = true;
      }
    }
  };

  const std::size_t n_threads = std::min(config.parallelism, std::max<std::size_t>(1, tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  out.close();
  if (error) std::rethrow_exception(error);

  for (const auto& r : load_records(config.output_dir)) {
    ++summary.per_condition[r.agent_id + "/" + std::string(agents::to_string(r.context))];
  }
  return summary;
}

std::vector<std::string> verify_prompt_hashes(const ExperimentConfig& config) {
  const Inputs in = load_inputs(config, true);
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < in.sample.size(); ++i) by_id[in.sample[i].id] = i;

  std::map<std::size_t, compilecheck::CompilerDiagnostics> diag_cache;
  std::vector<std::string> bad;
  for (const auto& r : load_records(config.output_dir)) {
    auto it = by_id.find(r.submission_id);
    if (it == by_id.end()) {
      bad.push_back(r.id);
      continue;
    }
    const auto& sub = in.sample[it->second];
    auto d = diag_cache.find(it->second);
    if (d == diag_cache.end()) d = diag_cache.emplace(it->second, check_or_timeout(sub.source, config.compile)).first;
    try {
      const auto prompt = agents::build_prompt(sub, find_problem(in, sub.problem_id), &d->second, r.context,
                                               in.templates);
      if (agents::prompt_hash(prompt) != r.prompt_hash) bad.push_back(r.id);
    } catch (const agents::PromptError&) {
      bad.push_back(r.id);
    }
  }
  return bad;
}

}  // namespace mend::harness

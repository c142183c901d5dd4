#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include "mend/agents.hpp"
#include "mend/annosvc.hpp"
#include "mend/compilecheck.hpp"
#include "mend/corpus.hpp"
#include "mend/harness.hpp"
#include "mend/javasyn.hpp"
#include "mend/metrics.hpp"
#include "mend/repair.hpp"
#include "mend/stats.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace mend;

std::string slurp(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Accepts inline JSON or a path to a JSON file.
json json_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (arg[first] == '[' || arg[first] == '{')) return json::parse(arg);
  return json::parse(slurp(arg));
}

compilecheck::CheckOptions check_options(const std::string& backend, const std::string& compiler) {
  compilecheck::CheckOptions opts;
  opts.compiler = compiler;
  if (backend == "auto") {
    opts.backend = compilecheck::compiler_available(compiler) ? compilecheck::Backend::external_javac
                                                              : compilecheck::Backend::internal_parse;
  } else {
    opts.backend = compilecheck::parse_backend(backend);
  }
  return opts;
}

json fix_json(const repair::Fix& f) {
  return {{"rule_id", f.rule_id}, {"line", f.line},     {"col", f.col},
          {"offset", f.offset},   {"text", f.text},     {"replaced", f.replaced}};
}

annosvc::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Syntax-repair evaluation toolkit for student Java code"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mend 0.1.0");

  // ingest
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus file and optionally convert it");
  ingest->add_option("file", ingest_in, "CSV or JSONL corpus")->required();
  ingest->add_option("--out", ingest_out, "Write the normalized corpus here (.csv or .jsonl)");

  // sample
  std::string sample_in, sample_backend = "auto", sample_compiler = "javac";
  std::vector<std::string> sample_problems;
  std::size_t sample_n = 100;
  std::uint64_t sample_seed = 0;
  bool sample_stratified = false;
  auto* sample = app.add_subcommand("sample", "Draw uncompilable submissions; prints JSONL");
  sample->add_option("corpus", sample_in)->required();
  sample->add_option("--problems", sample_problems, "Problem ids (default: all)")->delimiter(',');
  sample->add_option("--n", sample_n)->capture_default_str();
  sample->add_option("--seed", sample_seed)->capture_default_str();
  sample->add_flag("--stratified", sample_stratified, "Equal quota per problem");
  sample->add_option("--backend", sample_backend, "auto, external_javac or internal_parse")->capture_default_str();
  sample->add_option("--compiler", sample_compiler)->capture_default_str();

  // lex / skeleton
  std::string lex_in, skel_in;
  bool lex_json = false;
  auto* lex = app.add_subcommand("lex", "Print the token stream");
  lex->add_option("file", lex_in)->required();
  lex->add_flag("--json", lex_json);
  auto* skeleton = app.add_subcommand("skeleton", "Print the control-flow skeleton");
  skeleton->add_option("file", skel_in)->required();

  // repair
  std::string repair_in, repair_engine = "rules", repair_fixes_out;
  auto* rep = app.add_subcommand("repair", "Apply the rule-based repair; prints the repaired source");
  rep->add_option("file", repair_in)->required();
  rep->add_option("--engine", repair_engine)->check(CLI::IsMember({"rules"}))->capture_default_str();
  rep->add_option("--fixes-out", repair_fixes_out, "Write applied fixes as JSON");

  // compile
  std::string compile_in, compile_backend = "auto", compile_compiler = "javac";
  auto* compile = app.add_subcommand("compile", "Check compilability; prints diagnostics as JSON");
  compile->add_option("file", compile_in)->required();
  compile->add_option("--backend", compile_backend, "auto, external_javac or internal_parse")->capture_default_str();
  compile->add_option("--compiler", compile_compiler)->capture_default_str();

  // metrics
  std::string metrics_orig, metrics_rep, metrics_backend = "internal_parse";
  auto* met = app.add_subcommand("metrics", "Compare an original and a repaired program");
  met->add_option("original", metrics_orig)->required();
  met->add_option("repaired", metrics_rep)->required();
  met->add_option("--backend", metrics_backend)->capture_default_str();

  // prompt
  std::string prompt_in, prompt_problems, prompt_problem_id, prompt_level = "low", prompt_templates;
  auto* prompt = app.add_subcommand("prompt", "Render the prompt for a source file");
  prompt->add_option("file", prompt_in)->required();
  prompt->add_option("--context", prompt_level)->check(CLI::IsMember({"low", "high"}))->capture_default_str();
  prompt->add_option("--problems", prompt_problems, "Problems JSON (high context)");
  prompt->add_option("--problem", prompt_problem_id, "Problem id (high context)");
  prompt->add_option("--templates", prompt_templates, "Template directory");

  // stats
  auto* st = app.add_subcommand("stats", "Statistical tests");
  st->require_subcommand(1);
  std::string chi_table, anova_groups, kappa_a, kappa_b;
  auto* chi2 = st->add_subcommand("chi2", "Pearson chi-square test of independence");
  chi2->add_option("--table", chi_table, "JSON matrix or file")->required();
  auto* anova = st->add_subcommand("anova", "One-way ANOVA");
  anova->add_option("--groups", anova_groups, "JSON array of arrays or file")->required();
  auto* kappa = st->add_subcommand("kappa", "Cohen's kappa");
  kappa->add_option("--a", kappa_a)->required();
  kappa->add_option("--b", kappa_b)->required();

  // run / verify / report
  std::string run_config;
  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("--config", run_config)->required()->check(CLI::ExistingFile);
  std::string verify_config;
  auto* verify = app.add_subcommand("verify", "Check stored prompt hashes against rebuilt prompts");
  verify->add_option("--config", verify_config)->required()->check(CLI::ExistingFile);
  std::string report_dir, report_format = "text";
  bool report_normalized = false, report_lp_sp = false, report_auto_only = false;
  auto* rpt = app.add_subcommand("report", "Analysis tables over an experiment store");
  rpt->add_option("--records", report_dir)->required()->check(CLI::ExistingDirectory);
  rpt->add_option("--format", report_format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  rpt->add_flag("--normalized", report_normalized, "Edit-distance groups use normalized distance");
  rpt->add_flag("--lp-requires-sp", report_lp_sp, "LP tables only over repairs with SP = 1");
  rpt->add_flag("--auto-only", report_auto_only, "Ignore human annotations");

  // serve
  std::string serve_dir, serve_annotators, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Annotation service");
  serve->add_option("--records", serve_dir)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--annotators", serve_annotators, "Default: <records>/annotators.json");
  serve->add_option("--static-dir", serve_static, "Serve a UI bundle from this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto corp = corpus::ingest(ingest_in);
      std::size_t uncompilable = 0, unknown = 0;
      for (const auto& s : corp.items()) {
        uncompilable += s.compile_status == corpus::CompileStatus::uncompilable;
        unknown += s.compile_status == corpus::CompileStatus::unknown;
      }
      if (!ingest_out.empty()) corpus::export_corpus(corp, ingest_out, corpus::format_for(ingest_out));
      std::cout << json{{"submissions", corp.size()}, {"uncompilable", uncompilable}, {"unknown", unknown}}.dump()
                << '\n';
    } else if (*sample) {
      corpus::SampleOptions opts;
      opts.problem_ids = sample_problems;
      opts.n = sample_n;
      opts.seed = sample_seed;
      opts.stratified = sample_stratified;
      opts.check = check_options(sample_backend, sample_compiler);
      for (const auto& s : corpus::sample_uncompilable(corpus::ingest(sample_in), opts)) {
        std::cout << harness::to_json(s).dump() << '\n';
      }
    } else if (*lex) {
      const auto stream = javasyn::tokenize(slurp(lex_in));
      if (lex_json) {
        json out = json::array();
        for (const auto& t : stream.tokens) {
          json j = {{"kind", javasyn::to_string(t.kind)}, {"lexeme", t.lexeme}, {"line", t.line}, {"col", t.col}};
          if (t.error != javasyn::LexError::none) j["error"] = javasyn::to_string(t.error);
          out.push_back(std::move(j));
        }
        std::cout << out.dump(2) << '\n';
      } else {
        for (const auto& t : stream.tokens) {
          std::cout << t.line << ':' << t.col << '\t' << javasyn::to_string(t.kind) << '\t' << json(t.lexeme).dump();
          if (t.error != javasyn::LexError::none) std::cout << '\t' << javasyn::to_string(t.error);
          std::cout << '\n';
        }
      }
    } else if (*skeleton) {
      std::cout << javasyn::render(javasyn::extract_skeleton(slurp(skel_in)));
    } else if (*rep) {
      const auto outcome = repair::repair(slurp(repair_in));
      std::cout << outcome.repaired_source;
      if (!repair_fixes_out.empty()) {
        json fixes = json::array();
        for (const auto& f : outcome.applied_fixes) fixes.push_back(fix_json(f));
        std::ofstream out(repair_fixes_out, std::ios::binary);
        out << json{{"parse_ok_after", outcome.parse_ok_after}, {"fixes", fixes}}.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write " + repair_fixes_out);
      }
      return outcome.parse_ok_after ? 0 : 3;
    } else if (*compile) {
      const auto diag = compilecheck::check(slurp(compile_in), check_options(compile_backend, compile_compiler));
      std::cout << harness::to_json(diag).dump(2) << '\n';
      return diag.ok ? 0 : 3;
    } else if (*met) {
      const std::string orig = slurp(metrics_orig), repaired = slurp(metrics_rep);
      const bool ok = compilecheck::check(repaired, check_options(metrics_backend, "javac")).ok;
      std::cout << harness::to_json(metrics::compute(orig, repaired, ok)).dump() << '\n';
    } else if (*prompt) {
      corpus::Submission sub;
      sub.id = prompt_in;
      sub.problem_id = prompt_problem_id;
      sub.source = slurp(prompt_in);
      std::map<std::string, corpus::Problem> problems;
      if (!prompt_problems.empty()) problems = corpus::load_problems(prompt_problems);
      const corpus::Problem* problem = nullptr;
      if (auto it = problems.find(prompt_problem_id); it != problems.end()) problem = &it->second;
      const auto diag = compilecheck::check(sub.source, check_options("internal_parse", "javac"));
      const auto templates = prompt_templates.empty() ? agents::PromptTemplates::defaults()
                                                      : agents::PromptTemplates::load(prompt_templates);
      const auto bundle =
          agents::build_prompt(sub, problem, &diag, agents::parse_context_level(prompt_level), templates);
      std::cout << "# system\n" << bundle.system_text << "\n# user\n" << bundle.user_text << "# hash "
                << agents::prompt_hash(bundle) << '\n';
    } else if (*chi2) {
      const json t = json_arg(chi_table);
      const auto r = stats::chi_square(stats::ContingencyTable::from_counts(t.get<std::vector<std::vector<std::int64_t>>>()));
      std::cout << json{{"statistic", r.statistic}, {"df", r.df}, {"p", r.p}, {"n", r.n},
                        {"apa", harness::apa_chi_square(r)}}
                       .dump()
                << '\n';
    } else if (*anova) {
      const auto r = stats::anova_oneway(json_arg(anova_groups).get<std::vector<std::vector<double>>>());
      std::cout << json{{"f", r.f}, {"df_between", r.df_between}, {"df_within", r.df_within}, {"p", r.p},
                        {"apa", harness::apa_anova(r)}}
                       .dump()
                << '\n';
    } else if (*kappa) {
      const auto a = json_arg(kappa_a), b = json_arg(kappa_b);
      stats::KappaResult r;
      if (!a.empty() && a.front().is_string()) {
        const auto va = a.get<std::vector<std::string>>(), vb = b.get<std::vector<std::string>>();
        r = stats::cohen_kappa(std::span<const std::string>(va), std::span<const std::string>(vb));
      } else {
        const auto va = a.get<std::vector<int>>(), vb = b.get<std::vector<int>>();
        r = stats::cohen_kappa(std::span<const int>(va), std::span<const int>(vb));
      }
      std::cout << json{{"kappa", r.kappa}, {"observed_agreement", r.observed_agreement},
                        {"expected_agreement", r.expected_agreement}, {"n", r.n}, {"degenerate", r.degenerate}}
                       .dump()
                << '\n';
    } else if (*run) {
      const auto s = harness::run_experiment(harness::load_config(run_config));
      std::cout << json{{"sampled", s.sampled},
                        {"conditions", s.conditions},
                        {"planned", s.planned},
                        {"skipped_existing", s.skipped_existing},
                        {"written", s.written},
                        {"agent_failures", s.agent_failures},
                        {"interrupted", s.interrupted},
                        {"per_condition", s.per_condition}}
                       .dump(2)
                << '\n';
    } else if (*verify) {
      const auto bad = harness::verify_prompt_hashes(harness::load_config(verify_config));
      for (const auto& id : bad) std::cout << "mismatch " << id << '\n';
      if (!bad.empty()) return 3;
      std::cout << "all prompt hashes match\n";
    } else if (*rpt) {
      const auto records = harness::load_records(report_dir);
      std::map<std::string, harness::HumanLabel> human;
      if (!report_auto_only) human = annosvc::consensus_labels(annosvc::load_annotations(report_dir));
      harness::ReportOptions opts;
      opts.normalized_distance = report_normalized;
      opts.lp_requires_sp = report_lp_sp;
      const auto r = harness::report(records, human, opts);
      if (report_format == "json") {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        std::cout << r.to_text();
      }
    } else if (*serve) {
      const fs::path annotators =
          serve_annotators.empty() ? fs::path(serve_dir) / "annotators.json" : fs::path(serve_annotators);
      annosvc::Service service(annosvc::load_service_config(serve_dir, annotators));
      std::optional<fs::path> static_dir;
      if (!serve_static.empty()) static_dir = serve_static;
      annosvc::Server server(service, static_dir);
      const int port = server.bind(serve_host, serve_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << serve_host << ':' << port << '\n';
      server.listen();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "mend: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

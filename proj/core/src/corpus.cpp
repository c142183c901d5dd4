#include "mend/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mend::corpus {
namespace {

using nlohmann::json;

const std::vector<std::string> kColumns = {"id",    "student_id", "problem_id", "code", "compile_status",
                                           "score", "timestamp"};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path.string());
  out << text;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string row_error(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

std::optional<double> parse_score(std::string_view text, std::size_t row) {
  if (text.empty()) return std::nullopt;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v >= 0.0 && v <= 1.0)) {
    throw CorpusError(row_error(row, "score must be a number in [0, 1], got '" + std::string(text) + "'"));
  }
  return v;
}

CompileStatus status_for_row(std::string_view text, std::size_t row) {
  try {
    return parse_compile_status(text);
  } catch (const std::invalid_argument& e) {
    throw CorpusError(row_error(row, e.what()));
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_string(const json& obj, const char* key, std::size_t row, std::string& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw CorpusError(row_error(row, std::string("missing required field '") + key + "'"));
  if (it->is_string()) {
    out = it->get<std::string>();
  } else if (it->is_number_integer()) {
    out = it->dump();
  } else {
    throw CorpusError(row_error(row, std::string("field '") + key + "' must be a string"));
  }
  if (out.empty()) throw CorpusError(row_error(row, std::string("missing required field '") + key + "'"));
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  // Largest multiple of bound that fits, to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::string_view to_string(CompileStatus s) {
  switch (s) {
    case CompileStatus::compilable: return "compilable";
    case CompileStatus::uncompilable: return "uncompilable";
    case CompileStatus::unknown: return "unknown";
  }
  return "?";
}

CompileStatus parse_compile_status(std::string_view s) {
  std::string v(s);
  for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "compilable" || v == "success" || v == "true" || v == "1") return CompileStatus::compilable;
  if (v == "uncompilable" || v == "error" || v == "false" || v == "0") return CompileStatus::uncompilable;
  if (v.empty() || v == "unknown") return CompileStatus::unknown;
  throw std::invalid_argument("unknown compile_status '" + std::string(s) + "'");
}

InsufficientSample::InsufficientSample(std::size_t requested, std::size_t available, const std::string& scope)
    : CorpusError("requested " + std::to_string(requested) + " uncompilable submissions but only " +
                  std::to_string(available) + " available" + (scope.empty() ? "" : " in " + scope)),
      requested_(requested),
      available_(available) {}

Corpus::Corpus(std::vector<Submission> items) {
  for (auto& s : items) add(std::move(s));
}

void Corpus::add(Submission s) {
  if (index_.count(s.id)) throw CorpusError("duplicate id '" + s.id + "'");
  index_.emplace(s.id, items_.size());
  items_.push_back(std::move(s));
}

const Submission* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &items_[it->second];
}

Format format_for(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return Format::csv;
  if (ext == ".jsonl" || ext == ".ndjson") return Format::jsonl;
  throw CorpusError("cannot infer corpus format from '" + path.string() + "' (use .csv or .jsonl)");
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
      ++i;
    } else if (c == '\n' || c == '\r') {
      end_record();
      i += (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ? 2 : 1;
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (quoted) throw CorpusError("unterminated quoted field in record " + std::to_string(records.size() + 1));
  if (field_started || !record.empty()) end_record();
  return records;
}

Corpus parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  auto records = parse_csv_records(text);
  if (records.empty()) throw CorpusError("empty CSV: header row required");
  const auto& header = records.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* required : {"id", "student_id", "problem_id", "code"}) {
    if (!col.count(required)) throw CorpusError(std::string("CSV header lacks required column '") + required + "'");
  }
  auto get = [&](const std::vector<std::string>& rec, const char* name) -> std::string {
    auto it = col.find(name);
    return it == col.end() ? std::string() : rec[it->second];
  };

  Corpus corpus;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != header.size()) {
      throw CorpusError(row_error(r, "expected " + std::to_string(header.size()) + " fields, found " +
                                         std::to_string(rec.size())));
    }
    Submission s;
    s.id = get(rec, "id");
    s.student_id = get(rec, "student_id");
    s.problem_id = get(rec, "problem_id");
    s.source = get(rec, "code");
    for (auto [name, value] : {std::pair{"id", &s.id}, std::pair{"student_id", &s.student_id},
                               std::pair{"problem_id", &s.problem_id}, std::pair{"code", &s.source}}) {
      if (value->empty()) throw CorpusError(row_error(r, std::string("missing required field '") + name + "'"));
    }
    s.compile_status = status_for_row(get(rec, "compile_status"), r);
    s.score = parse_score(get(rec, "score"), r);
    if (auto ts = get(rec, "timestamp"); !ts.empty()) s.submitted_at = ts;
    try {
      corpus.add(std::move(s));
    } catch (const CorpusError& e) {
      throw CorpusError(row_error(r, e.what()));
    }
  }
  return corpus;
}

Corpus parse_jsonl(std::string_view text) {
  Corpus corpus;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (blank(line)) continue;
    ++row;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(row_error(row, std::string("invalid JSON: ") + e.what()));
    }
    if (!obj.is_object()) throw CorpusError(row_error(row, "expected a JSON object"));
    Submission s;
    require_string(obj, "id", row, s.id);
    require_string(obj, "student_id", row, s.student_id);
    require_string(obj, "problem_id", row, s.problem_id);
    require_string(obj, "code", row, s.source);
    if (auto it = obj.find("compile_status"); it != obj.end() && !it->is_null()) {
      if (it->is_boolean()) {
        s.compile_status = it->get<bool>() ? CompileStatus::compilable : CompileStatus::uncompilable;
      } else if (it->is_string()) {
        s.compile_status = status_for_row(it->get<std::string>(), row);
      } else {
        throw CorpusError(row_error(row, "compile_status must be a string"));
      }
    }
    if (auto it = obj.find("score"); it != obj.end() && !it->is_null()) {
      if (!it->is_number()) throw CorpusError(row_error(row, "score must be a number"));
      const double v = it->get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw CorpusError(row_error(row, "score must be in [0, 1]"));
      s.score = v;
    }
    if (auto it = obj.find("timestamp"); it != obj.end() && !it->is_null()) {
      s.submitted_at = it->is_string() ? it->get<std::string>() : it->dump();
    }
    try {
      corpus.add(std::move(s));
    } catch (const CorpusError& e) {
      throw CorpusError(row_error(row, e.what()));
    }
  }
  return corpus;
}

Corpus ingest(const std::filesystem::path& path, Format format) {
  const std::string text = read_text(path);
  return format == Format::csv ? parse_csv(text) : parse_jsonl(text);
}

Corpus ingest(const std::filesystem::path& path) { return ingest(path, format_for(path)); }

std::string to_csv(const Corpus& corpus) {
  std::string out;
  for (std::size_t k = 0; k < kColumns.size(); ++k) out += (k ? "," : "") + kColumns[k];
  out += "\n";
  for (const auto& s : corpus) {
    out += csv_field(s.id) + "," + csv_field(s.student_id) + "," + csv_field(s.problem_id) + "," +
           csv_field(s.source) + "," + std::string(to_string(s.compile_status)) + "," +
           (s.score ? format_score(*s.score) : "") + "," + csv_field(s.submitted_at.value_or("")) + "\n";
  }
  return out;
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    json obj = {{"id", s.id},
                {"student_id", s.student_id},
                {"problem_id", s.problem_id},
                {"code", s.source},
                {"compile_status", to_string(s.compile_status)}};
    if (s.score) obj["score"] = *s.score;
    if (s.submitted_at) obj["timestamp"] = *s.submitted_at;
    out += obj.dump() + "\n";
  }
  return out;
}

void export_corpus(const Corpus& corpus, const std::filesystem::path& path, Format format) {
  write_text(path, format == Format::csv ? to_csv(corpus) : to_jsonl(corpus));
}

std::map<std::string, Problem> parse_problems(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw CorpusError(std::string("invalid problems JSON: ") + e.what());
  }
  const json& list = doc.is_object() && doc.contains("problems") ? doc["problems"] : doc;
  if (!list.is_array()) throw CorpusError("problems file must be a JSON array or {\"problems\": [...]}");
  std::map<std::string, Problem> out;
  for (const auto& p : list) {
    Problem prob;
    if (!p.contains("id")) throw CorpusError("problem without id");
    prob.id = p["id"].is_string() ? p["id"].get<std::string>() : p["id"].dump();
    prob.statement = p.value("statement", "");
    if (p.contains("fewshot")) {
      for (const auto& ex : p["fewshot"]) {
        FewshotExample fs;
        fs.broken = ex.at("broken").get<std::string>();
        fs.repaired = ex.at("repaired").get<std::string>();
        const std::string label = ex.value("label", "correct");
        if (label != "correct" && label != "incorrect") {
          throw CorpusError("problem " + prob.id + ": fewshot label must be correct or incorrect");
        }
        fs.correct = label == "correct";
        if (fs.broken == fs.repaired) {
          throw CorpusError("problem " + prob.id + ": fewshot example " + std::to_string(prob.fewshot.size() + 1) +
                            " has identical broken and repaired code");
        }
        prob.fewshot.push_back(std::move(fs));
      }
    }
    if (out.count(prob.id)) throw CorpusError("duplicate problem id '" + prob.id + "'");
    out.emplace(prob.id, std::move(prob));
  }
  return out;
}

std::map<std::string, Problem> load_problems(const std::filesystem::path& path) {
  return parse_problems(read_text(path));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) perm[k] = k;
  std::mt19937_64 rng(seed);
  for (std::size_t k = n; k > 1; --k) std::swap(perm[k - 1], perm[bounded(rng, k)]);
  return perm;
}

std::vector<Submission> sample_uncompilable(const Corpus& corpus, const SampleOptions& options) {
  if (options.n == 0) return {};
  const std::set<std::string> wanted(options.problem_ids.begin(), options.problem_ids.end());

  // Pool in corpus order: selected problems, non-blank source, uncompilable
  // (unknown statuses are classified now).
  std::vector<const Submission*> pool;
  for (const auto& s : corpus) {
    if (!wanted.empty() && !wanted.count(s.problem_id)) continue;
    if (blank(s.source)) continue;
    CompileStatus status = s.compile_status;
    if (status == CompileStatus::unknown) {
      status = compilecheck::check(s.source, options.check).ok ? CompileStatus::compilable
                                                               : CompileStatus::uncompilable;
    }
    if (status == CompileStatus::uncompilable) pool.push_back(&s);
  }

  auto draw = [&](const std::vector<const Submission*>& from, std::size_t n, std::uint64_t seed) {
    const auto perm = seeded_permutation(from.size(), seed);
    std::vector<Submission> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(*from[perm[k]]);
    return out;
  };

  if (!options.stratified) {
    if (options.n > pool.size()) throw InsufficientSample(options.n, pool.size(), "the selected problems");
    return draw(pool, options.n, options.seed);
  }

  std::map<std::string, std::vector<const Submission*>> strata;
  for (const auto& id : options.problem_ids) strata[id];
  for (const auto* s : pool) strata[s->problem_id].push_back(s);
  if (strata.empty()) throw InsufficientSample(options.n, 0, "the selected problems");
  const std::size_t k = strata.size();
  std::vector<Submission> out;
  std::size_t index = 0;
  for (const auto& [problem, members] : strata) {
    const std::size_t quota = options.n / k + (index < options.n % k ? 1 : 0);
    if (quota > members.size()) throw InsufficientSample(quota, members.size(), "problem " + problem);
    for (auto& s : draw(members, quota, options.seed + index)) out.push_back(std::move(s));
    ++index;
  }
  return out;
}

}  // namespace mend::corpus

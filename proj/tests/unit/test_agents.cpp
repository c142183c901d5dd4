#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "httplib.h"
#include "mend/agents.hpp"

using namespace mend::agents;
using mend::compilecheck::CompilerDiagnostics;
using mend::compilecheck::Severity;
using mend::corpus::FewshotExample;
using mend::corpus::Problem;
using mend::corpus::Submission;
namespace t = mend::testing;

namespace {

Submission submission(std::string code) {
  Submission s;
  s.id = "s1";
  s.student_id = "u1";
  s.problem_id = "P1";
  s.source = std::move(code);
  return s;
}

Problem problem() {
  Problem p;
  p.id = "P1";
  p.statement = "Return the larger of two ints.";
  p.fewshot = {{"int m = a\n", "int m = a;\n", true}, {"int m = a\n", "return Math.max(a, b);\n", false}};
  return p;
}

CompilerDiagnostics diag() {
  CompilerDiagnostics d;
  d.ok = false;
  d.messages = {{1, 10, Severity::error, "';' expected"}};
  return d;
}

class FixedEndpoint : public AgentEndpoint {
 public:
  explicit FixedEndpoint(std::vector<std::string> replies, int failures = 0)
      : replies_(std::move(replies)), failures_(failures) {}
  std::string id() const override { return "fixed"; }
  std::string complete(const PromptBundle&) override {
    ++calls;
    if (failures_-- > 0) throw TransportError("connection reset");
    return replies_.at(std::min<std::size_t>(calls - 1, replies_.size() - 1));
  }
  int calls = 0;

 private:
  std::vector<std::string> replies_;
  int failures_;
};

RunOptions no_sleep(std::vector<std::chrono::milliseconds>* slept = nullptr) {
  RunOptions o;
  o.max_retries = 3;
  o.initial_backoff = std::chrono::milliseconds(100);
  o.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return o;
}

}  // namespace

TEST(Prompt, LowContainsOnlyCodeAndInstructions) {
  const auto p = problem();
  const auto d = diag();
  const auto b = build_prompt(submission("int x = 1\n"), &p, &d, ContextLevel::low);
  EXPECT_EQ(b.included_parts, (std::set<Part>{Part::code, Part::instructions}));
  EXPECT_EQ(b.user_text.find("';' expected"), std::string::npos);
  EXPECT_EQ(b.user_text.find(p.statement), std::string::npos);
  EXPECT_EQ(b.user_text.find("Math.max"), std::string::npos);
  EXPECT_NE(b.user_text.find("int x = 1\n"), std::string::npos);
}

TEST(Prompt, HighAddsEveryPart) {
  const auto p = problem();
  const auto d = diag();
  const auto b = build_prompt(submission("int x = 1\n"), &p, &d, ContextLevel::high);
  EXPECT_EQ(b.included_parts.size(), 5u);
  EXPECT_NE(b.user_text.find("line 1: error: ';' expected"), std::string::npos);
  EXPECT_NE(b.user_text.find(p.statement), std::string::npos);
  EXPECT_NE(b.user_text.find("Math.max"), std::string::npos);
  EXPECT_NE(b.user_text.find(PromptTemplates::defaults().fewshot_incorrect), std::string::npos);
  // The student's code is still the first fenced block.
  EXPECT_EQ(extract_first_fenced_block(b.user_text), "int x = 1\n");
}

TEST(Prompt, HighWithMissingPartsThrows) {
  const auto d = diag();
  auto p = problem();
  EXPECT_THROW(build_prompt(submission("x"), nullptr, &d, ContextLevel::high), PromptError);
  EXPECT_THROW(build_prompt(submission("x"), &p, nullptr, ContextLevel::high), PromptError);
  p.statement = "  \n";
  EXPECT_THROW(build_prompt(submission("x"), &p, &d, ContextLevel::high), PromptError);
  p = problem();
  p.fewshot.clear();
  try {
    build_prompt(submission("x"), &p, &d, ContextLevel::high);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_NE(std::string(e.what()).find("fewshot"), std::string::npos);
  }
  EXPECT_NO_THROW(build_prompt(submission("x"), nullptr, nullptr, ContextLevel::low));
}

TEST(Prompt, GoldenLow) {
  const auto b = build_prompt(submission("int x = 1\n"), nullptr, nullptr, ContextLevel::low);
  const auto tpl = PromptTemplates::defaults();
  EXPECT_EQ(b.system_text, tpl.system);
  EXPECT_EQ(b.user_text, tpl.instructions + "\n\nStudent code:\n```java\nint x = 1\n\n```\n");
}

TEST(Prompt, TemplatesFromDirectory) {
  t::TempDir dir;
  t::write_text(dir.path() / "system.txt", "custom system\n");
  const auto tpl = PromptTemplates::load(dir.path());
  EXPECT_EQ(tpl.system, "custom system");
  EXPECT_EQ(tpl.instructions, PromptTemplates::defaults().instructions);
}

TEST(Prompt, ShippedTemplatesMatchDefaults) {
  const auto dir = t::data_dir().parent_path().parent_path() / "data" / "templates";
  ASSERT_TRUE(std::filesystem::exists(dir / "system.txt")) << dir;
  const auto shipped = PromptTemplates::load(dir);
  const auto d = PromptTemplates::defaults();
  EXPECT_EQ(shipped.system, d.system);
  EXPECT_EQ(shipped.instructions, d.instructions);
  EXPECT_EQ(shipped.code_heading, d.code_heading);
  EXPECT_EQ(shipped.compiler_heading, d.compiler_heading);
  EXPECT_EQ(shipped.statement_heading, d.statement_heading);
  EXPECT_EQ(shipped.fewshot_heading, d.fewshot_heading);
  EXPECT_EQ(shipped.fewshot_correct, d.fewshot_correct);
  EXPECT_EQ(shipped.fewshot_incorrect, d.fewshot_incorrect);
}

TEST(Hash, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hash, CoversBothTexts) {
  PromptBundle a;
  a.system_text = "s";
  a.user_text = "u";
  EXPECT_EQ(prompt_hash(a), sha256_hex(std::string("s\0u", 3)));
  PromptBundle b = a;
  b.system_text = "su";
  b.user_text = "";
  EXPECT_NE(prompt_hash(a), prompt_hash(b));
}

TEST(Fence, RoundTripsArbitraryCode) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    std::string code(rng() % 40, ' ');
    for (auto& c : code) c = "`~\n ab;{}\r"[rng() % 10];
    ASSERT_EQ(extract_first_fenced_block(fence(code)), code) << i;
  }
  for (const auto& seed : t::load_seeds()) EXPECT_EQ(extract_first_fenced_block(fence(seed.source)), seed.source);
}

TEST(Fence, Extraction) {
  EXPECT_EQ(extract_first_fenced_block("Here:\n```java\nint x;\n```\nmore\n```\nsecond\n```"), "int x;");
  EXPECT_EQ(extract_first_fenced_block("~~~\na\n~~~"), "a");
  EXPECT_EQ(extract_first_fenced_block("```\n```\n"), "");
  EXPECT_FALSE(extract_first_fenced_block("```java\nint x;\n").has_value());
  EXPECT_FALSE(extract_first_fenced_block("no code here").has_value());
  EXPECT_EQ(extract_first_fenced_block("```java\r\nint x;\r\n```\r\n"), "int x;\r");
}

TEST(Mock, EchoAndRuleProxy) {
  const auto b = build_prompt(submission("int x = 1\nreturn x;"), nullptr, nullptr, ContextLevel::low);
  MockEndpoint echo("echo", MockBehavior::echo);
  EXPECT_EQ(extract_first_fenced_block(echo.complete(b)), "int x = 1\nreturn x;");
  MockEndpoint proxy("proxy", MockBehavior::rule_proxy);
  EXPECT_EQ(extract_first_fenced_block(proxy.complete(b)), "int x = 1;\nreturn x;");
}

TEST(Mock, RecordThenReplay) {
  t::TempDir dir;
  const auto script = dir.path() / "script.jsonl";
  auto inner = std::make_shared<MockEndpoint>("proxy", MockBehavior::rule_proxy);
  RecordingEndpoint rec(inner, script);
  const auto b1 = build_prompt(submission("int a = 1\n"), nullptr, nullptr, ContextLevel::low);
  const auto b2 = build_prompt(submission("int b = 2\n"), nullptr, nullptr, ContextLevel::low);
  const auto r1 = rec.complete(b1);
  const auto r2 = rec.complete(b2);
  MockEndpoint replay("proxy", MockEndpoint::load_script(script));
  EXPECT_EQ(replay.complete(b1), r1);
  EXPECT_EQ(replay.complete(b2), r2);
  const auto b3 = build_prompt(submission("other"), nullptr, nullptr, ContextLevel::low);
  EXPECT_THROW(replay.complete(b3), TransportError);
}

TEST(Mock, BehaviorNames) {
  EXPECT_EQ(parse_mock_behavior("rule_proxy"), MockBehavior::rule_proxy);
  EXPECT_THROW(parse_mock_behavior("oracle"), std::invalid_argument);
}

TEST(RunAgent, RetriesWithBackoffThenSucceeds) {
  std::vector<std::chrono::milliseconds> slept;
  FixedEndpoint ep({"```java\nx;\n```"}, 2);
  const auto r = run_agent(PromptBundle{}, ep, no_sleep(&slept));
  EXPECT_FALSE(r.failure.has_value());
  EXPECT_EQ(r.repaired_source, "x;");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(100), std::chrono::milliseconds(200)}));
  EXPECT_EQ(r.agent_id, "fixed");
}

TEST(RunAgent, GivesUpAfterMaxRetries) {
  FixedEndpoint ep({"unused"}, 10);
  const auto r = run_agent(PromptBundle{}, ep, no_sleep());
  EXPECT_EQ(r.failure, Failure::transport);
  EXPECT_EQ(ep.calls, 4);
  EXPECT_NE(r.error_message.find("connection reset"), std::string::npos);
  EXPECT_FALSE(r.repaired_source.has_value());
}

TEST(RunAgent, ClassifiesBadReplies) {
  FixedEndpoint refusal({"I'm sorry, but I can't help with that."});
  EXPECT_EQ(run_agent(PromptBundle{}, refusal, no_sleep()).failure, Failure::refusal);
  FixedEndpoint unfenced({"int x = 1;"});
  EXPECT_EQ(run_agent(PromptBundle{}, unfenced, no_sleep()).failure, Failure::unfenced);
  FixedEndpoint empty({" \n"});
  EXPECT_EQ(run_agent(PromptBundle{}, empty, no_sleep()).failure, Failure::empty);
  FixedEndpoint fenced_refusal({"I'm sorry, here you go anyway:\n```\nint x;\n```"});
  EXPECT_FALSE(run_agent(PromptBundle{}, fenced_refusal, no_sleep()).failure.has_value());
}

TEST(RunAgent, FailureNames) {
  for (auto f : {Failure::transport, Failure::refusal, Failure::empty, Failure::unfenced})
    EXPECT_EQ(parse_failure(to_string(f)), f);
}

class HttpEndpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (fail_next_) {
        fail_next_ = false;
        res.status = 503;
        return;
      }
      const nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "```java\nok;\n```"}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  HttpEndpointConfig config() const {
    HttpEndpointConfig c;
    c.id = "remote";
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
    c.model = "test-model";
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string last_body_;
  std::string last_auth_;
  std::atomic<bool> fail_next_{false};
};

TEST_F(HttpEndpointTest, SendsChatRequest) {
  setenv("MEND_TEST_KEY", "sekrit", 1);
  auto c = config();
  c.api_key_env = "MEND_TEST_KEY";
  c.temperature = 0.5;
  HttpChatEndpoint ep(c);
  const auto b = build_prompt(submission("int x = 1\n"), nullptr, nullptr, ContextLevel::low);
  EXPECT_EQ(ep.complete(b), "```java\nok;\n```");
  const auto body = nlohmann::json::parse(last_body_);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0.5);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], b.user_text);
  EXPECT_EQ(last_auth_, "Bearer sekrit");
  unsetenv("MEND_TEST_KEY");
}

TEST_F(HttpEndpointTest, ServerErrorIsRetried) {
  fail_next_ = true;
  HttpChatEndpoint ep(config());
  const auto r = run_agent(PromptBundle{}, ep, no_sleep());
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(r.repaired_source, "ok;");
}

TEST_F(HttpEndpointTest, MissingKeyIsTransportError) {
  auto c = config();
  c.api_key_env = "MEND_TEST_KEY_UNSET";
  HttpChatEndpoint ep(c);
  EXPECT_THROW(ep.complete(PromptBundle{}), TransportError);
}

TEST(HttpEndpoint, BadUrlRejected) {
  HttpEndpointConfig c;
  c.base_url = "ftp://example.com";
  EXPECT_THROW(HttpChatEndpoint{c}, TransportError);
}

TEST(HttpEndpoint, UnreachableServer) {
  HttpEndpointConfig c;
  c.id = "down";
  c.base_url = "http://127.0.0.1:1";
  c.timeout = std::chrono::seconds(2);
  HttpChatEndpoint ep(c);
  EXPECT_THROW(ep.complete(PromptBundle{}), TransportError);
}

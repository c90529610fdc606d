#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "poet/error.hpp"
#include "poet/provider.hpp"
#include "support.hpp"

using namespace poet;
using namespace poet::provider;
using nlohmann::json;

namespace {

GenerationRequest req(const std::string& tag, double temperature = 0.8)
{
    GenerationRequest r;
    r.bundle.system_text = "sys";
    r.bundle.user_text = "user";
    r.temperature = temperature;
    r.attempt_tag = tag;
    return r;
}

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::PreconditionViolated;
}

/// Minimal chat-completions endpoint on a loopback port, scripted with a status sequence.
class FakeEndpoint {
public:
    explicit FakeEndpoint(std::vector<int> statuses) : statuses_(std::move(statuses))
    {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
            const std::size_t i = hits_++;
            last_body_ = rq.body;
            last_auth_ = rq.get_header_value("Authorization");
            const int status = i < statuses_.size() ? statuses_[i] : 200;
            rs.status = status;
            if (status == 200)
                rs.set_content(json{{"choices", {{{"message", {{"content", "reply " + std::to_string(i)}}}}}},
                                    {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 34}}}}
                                   .dump(),
                               "application/json");
            else
                rs.set_content("{}", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint()
    {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    std::size_t hits() const { return hits_; }
    std::string last_body() const { return last_body_; }
    std::string last_auth() const { return last_auth_; }

private:
    httplib::Server server_;
    std::vector<int> statuses_;
    std::atomic<std::size_t> hits_{0};
    std::string last_body_;
    std::string last_auth_;
    int port_ = 0;
    std::thread thread_;
};

RemoteSettings settings_for(const std::string& url)
{
    RemoteSettings s;
    s.base_url = url;
    s.model = "test-model";
    s.api_key_env = "POET_TEST_API_KEY";
    s.timeout_s = 2.0;
    return s;
}

}  // namespace

TEST_CASE("request validation")
{
    ScriptedProvider p({{std::nullopt, "x", "inline"}});
    CHECK(code_of([&] { p.generate(req("t", 2.5)); }) == Errc::PreconditionViolated);
    auto r = req("t");
    r.max_tokens = 10;
    CHECK(code_of([&] { p.generate(r); }) == Errc::PreconditionViolated);
    r = req("t");
    r.bundle.user_text.clear();
    CHECK(code_of([&] { p.generate(r); }) == Errc::PreconditionViolated);
}

TEST_CASE("scripted provider replays in order, then runs out")
{
    ScriptedProvider p({{std::nullopt, "f1", "a"}, {std::nullopt, "f2", "b"}});
    CHECK(p.generate(req("x")).text == "f1");
    CHECK(p.generate(req("y")).text == "f2");
    CHECK(code_of([&] { p.generate(req("z")); }) == Errc::FixtureExhausted);
}

TEST_CASE("scripted provider prefers tagged fixtures")
{
    ScriptedProvider p({{std::nullopt, "plain", "a"},
                        {std::string("seed/2/*"), "seed two", "b"},
                        {std::string("spec/1"), "spec", "c"}});
    CHECK(p.generate(req("seed/2/AreaFocused")).text == "seed two");
    CHECK(p.generate(req("spec/1")).text == "spec");
    CHECK(p.generate(req("seed/2/AreaFocused")).text == "plain");
    CHECK(p.remaining() == 0);
}

TEST_CASE("scripted provider checkpoint round trip")
{
    std::vector<ScriptedProvider::Entry> e{{std::nullopt, "a", ""}, {std::nullopt, "b", ""}, {std::nullopt, "c", ""}};
    ScriptedProvider p(e);
    p.generate(req("1"));
    const json cp = p.checkpoint();
    ScriptedProvider q(e);
    q.restore(cp);
    CHECK(q.generate(req("2")).text == "b");
    CHECK(q.remaining() == 1);
    CHECK(code_of([&] { q.restore(json{{"used", {7}}}); }) == Errc::JournalParseError);
}

TEST_CASE("scripted provider loads manifests and directories")
{
    test::TempDir dir("fixtures");
    test::write_file(dir / "b.txt", "second");
    test::write_file(dir / "a.txt", "first");
    auto plain = ScriptedProvider::load(dir.path());
    CHECK(plain->generate(req("x")).text == "first");
    CHECK(plain->generate(req("x")).text == "second");

    test::write_file(dir / "manifest.json",
                     R"({"fixtures": [{"tag": "vectors/*", "file": "b.txt"}, {"text": "inline"}]})");
    auto man = ScriptedProvider::load(dir.path());
    CHECK(man->generate(req("spec/1")).text == "inline");
    CHECK(man->generate(req("vectors/1")).text == "second");
}

TEST_CASE("remote provider needs its credential variable")
{
    ::unsetenv("POET_TEST_API_KEY");
    CHECK(code_of([] { RemoteProvider p(settings_for("http://127.0.0.1:1/v1")); }) == Errc::AuthError);
}

TEST_CASE("remote provider: unreachable endpoint gives TransportError after 3 retries")
{
    ::setenv("POET_TEST_API_KEY", "k", 1);
    std::vector<long> sleeps;
    auto s = settings_for("http://127.0.0.1:1/v1");  // port 1: connection refused
    s.timeout_s = 0.5;
    RemoteProvider p(s, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CHECK(code_of([&] { p.generate(req("t")); }) == Errc::TransportError);
    CHECK(sleeps == std::vector<long>{1000, 2000, 4000});
}

TEST_CASE("remote provider: retries 429 and 5xx, then succeeds")
{
    ::setenv("POET_TEST_API_KEY", "secret", 1);
    FakeEndpoint ep({429, 503});
    std::vector<long> sleeps;
    RemoteProvider p(settings_for(ep.url()), [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    const auto r = p.generate(req("t", 0.2));
    CHECK(r.text == "reply 2");
    REQUIRE(r.usage.has_value());
    CHECK(r.usage->prompt_tokens == 12);
    CHECK(r.usage->completion_tokens == 34);
    CHECK(ep.hits() == 3);
    CHECK(sleeps == std::vector<long>{1000, 2000});
    CHECK(ep.last_auth() == "Bearer secret");
    const json body = json::parse(ep.last_body());
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"].get<double>() == doctest::Approx(0.2));
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "user");
}

TEST_CASE("remote provider: 401 is not retried")
{
    ::setenv("POET_TEST_API_KEY", "k", 1);
    FakeEndpoint ep({401});
    RemoteProvider p(settings_for(ep.url()), [](std::chrono::milliseconds) {});
    CHECK(code_of([&] { p.generate(req("t")); }) == Errc::AuthError);
    CHECK(ep.hits() == 1);
}

TEST_CASE("remote provider: persistent 500 exhausts retries")
{
    ::setenv("POET_TEST_API_KEY", "k", 1);
    FakeEndpoint ep({500, 500, 500, 500, 500});
    RemoteProvider p(settings_for(ep.url()), [](std::chrono::milliseconds) {});
    CHECK(code_of([&] { p.generate(req("t")); }) == Errc::TransportError);
    CHECK(ep.hits() == 4);
}

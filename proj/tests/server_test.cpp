#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "pseudovos/review_server.hpp"
#include "support.hpp"

using namespace pseudovos;
using namespace pseudovos::review;
using nlohmann::json;
using testing_support::fixture;
using testing_support::TempDir;

namespace {

class ServerTest : public ::testing::Test {
protected:
    void SetUp() override { start(); }
    void TearDown() override { shutdown(); }

    void start()
    {
        const auto manifest = load_manifest(fixture("two_seq/manifest.json"));
        service_ = std::make_unique<ReviewService>(manifest, generate(manifest, BoxToMaskConverter{}, GenerateStrategy::none),
                                                   dir_ / "decisions.ndjson");
        server_ = std::make_unique<ReviewServer>(*service_);
        const int port = server_->bind("127.0.0.1", 0);
        thread_ = std::thread([this] { server_->listen(); });
        server_->wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    void shutdown()
    {
        server_->stop();
        thread_.join();
        client_.reset();
        server_.reset();
        service_.reset();
    }

    json get(const std::string& path, int expected = 200)
    {
        auto res = client_->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res)
            return {};
        EXPECT_EQ(res->status, expected) << path << " " << res->body;
        return res->get_header_value("Content-Type") == "application/json" ? json::parse(res->body) : json(res->body);
    }

    httplib::Result post(const json& body) { return client_->Post("/api/decisions", body.dump(), "application/json"); }

    TempDir dir_;
    std::unique_ptr<ReviewService> service_;
    std::unique_ptr<ReviewServer> server_;
    std::unique_ptr<httplib::Client> client_;
    std::thread thread_;
};

} // namespace

TEST_F(ServerTest, ListsSequences) { EXPECT_EQ(get("/api/sequences").at("sequences"), (json{"alpha", "beta"})); }

TEST_F(ServerTest, SequenceMetadata)
{
    const auto j = get("/api/sequences/alpha");
    EXPECT_EQ(j.at("width"), 8);
    EXPECT_EQ(j.at("objects")[0].at("category"), "person");
}

TEST_F(ServerTest, UnknownSequenceEchoesId)
{
    const auto j = get("/api/sequences/gamma", 404);
    EXPECT_EQ(j.at("id"), "gamma");
    EXPECT_EQ(j.at("error"), "not_found");
    EXPECT_EQ(get("/api/sequences/gamma/frames/0/masks", 404).at("id"), "gamma");
}

TEST_F(ServerTest, FrameImageIsStreamedVerbatim)
{
    auto res = client_->Get("/api/sequences/alpha/frames/0/image");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/x-portable-graymap");
    EXPECT_EQ(res->body.rfind("P5", 0), 0u);
    EXPECT_EQ(get("/api/sequences/alpha/frames/30/image", 404).at("id"), "alpha");
}

TEST_F(ServerTest, FrameMasks)
{
    const auto j = get("/api/sequences/beta/frames/2/masks");
    ASSERT_EQ(j.at("masks").size(), 2u);
    EXPECT_EQ(j.at("masks")[0].at("provenance").at("converter"), "box_fill");
}

TEST_F(ServerTest, DecisionRoundTripAndVerdicts)
{
    auto res = post({{"sequence", "alpha"}, {"object", 1}, {"frame", 2}, {"verdict", "reject"}});
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body).at("ack"), true);
    const auto state = get("/api/state");
    EXPECT_EQ(state.at("reviewed"), 1);
    EXPECT_EQ(state.at("rejected"), 1);
    const auto verdicts = get("/api/verdicts").at("verdicts");
    ASSERT_EQ(verdicts.size(), 1u);
    EXPECT_EQ(get("/api/queue").at("queue").size(), service_->labels().provenance.size() - 1);
}

TEST_F(ServerTest, MalformedBodiesAreRejected)
{
    auto bad_json = client_->Post("/api/decisions", "{nope", "application/json");
    ASSERT_TRUE(bad_json);
    EXPECT_EQ(bad_json->status, 400);
    EXPECT_EQ(json::parse(bad_json->body).at("error"), "parse");
    auto unknown = post({{"sequence", "beta"}, {"object", 1}, {"frame", 30}, {"verdict", "accept"}});
    ASSERT_TRUE(unknown);
    EXPECT_EQ(unknown->status, 404);
    EXPECT_EQ(get("/api/state").at("records"), 0);
}

TEST_F(ServerTest, ReloadPreservesCommittedVerdicts)
{
    ASSERT_TRUE(post({{"sequence", "beta"}, {"object", 2}, {"frame", 3}, {"verdict", "needs_mask"},
                      {"polygon", {{4, 2}, {7, 2}, {7, 5}}}}));
    ASSERT_TRUE(post({{"sequence", "beta"}, {"object", 1}, {"frame", 1}, {"verdict", "accept"}}));
    const auto before = get("/api/state");
    shutdown();
    start();
    EXPECT_EQ(get("/api/state"), before);
}

TEST_F(ServerTest, ConcurrentPostsAreSerialized)
{
    const int port = server_->port();
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([port, t] {
            httplib::Client c("127.0.0.1", port);
            for (int i = 0; i < 10; ++i) {
                const json body{{"sequence", "alpha"}, {"object", 1}, {"frame", i % 3}, {"verdict", t % 2 ? "accept" : "reject"}};
                auto res = c.Post("/api/decisions", body.dump(), "application/json");
                EXPECT_TRUE(res && res->status == 200);
            }
        });
    for (auto& th : threads)
        th.join();
    EXPECT_EQ(get("/api/state").at("records"), 40);
    EXPECT_EQ(DecisionLog::read(dir_ / "decisions.ndjson").size(), 40u);
}

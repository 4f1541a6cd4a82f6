#include <gtest/gtest.h>

#include <thread>

#include "retina/service.hpp"

using namespace retina;
using namespace retina::service;
using nlohmann::json;

namespace {

std::vector<double> grid() { return wavelength_grid(400, 700, 20); }

PaletteEntry entry(double d, double w, std::vector<double> v) {
    PaletteEntry e{{d, w, 110}, "air", RedoxState::colored, Spectrum(grid(), std::move(v)), {}, {}};
    e.color = spectrum_to_xyz(e.spectrum);
    return e;
}

std::vector<double> notch(double lo, double hi) {
    std::vector<double> v;
    for (double w : grid()) v.push_back(w >= lo && w < hi ? 0.02 : 0.95);
    return v;
}

std::shared_ptr<const Palette> tiny_palette() {
    PaletteMetadata m;
    m.grid = grid();
    m.harmonics = 1;
    Palette p(m);
    p.add(entry(260, 160, notch(600, 701)));
    p.add(entry(240, 100, notch(500, 600)));
    p.add(entry(180, 180, notch(400, 500)));
    return std::make_shared<const Palette>(std::move(p));
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override { start({}); }

    void start(ServiceConfig cfg) {
        stop();
        cfg.harmonics = cfg.harmonics == ServiceConfig{}.harmonics ? 1 : cfg.harmonics;
        PaletteSet set{{{"air", RedoxState::colored}, tiny_palette()}};
        svc = std::make_unique<Service>(set, cfg);
        server = std::make_unique<httplib::Server>();
        svc->mount(*server);
        port = server->bind_to_any_port("127.0.0.1");
        ASSERT_GT(port, 0);
        thread = std::thread([this] { server->listen_after_bind(); });
        server->wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    void stop() {
        if (server) server->stop();
        if (thread.joinable()) thread.join();
    }

    void TearDown() override { stop(); }

    std::pair<int, json> get(const std::string& path) {
        auto r = client->Get(path);
        EXPECT_TRUE(r);
        return {r->status, json::parse(r->body)};
    }

    std::pair<int, json> post(const std::string& path, const std::string& body) {
        auto r = client->Post(path, body, "application/json");
        EXPECT_TRUE(r);
        return {r->status, json::parse(r->body)};
    }

    std::unique_ptr<Service> svc;
    std::unique_ptr<httplib::Server> server;
    std::unique_ptr<httplib::Client> client;
    std::thread thread;
    int port = 0;
};

}  // namespace

TEST_F(ServiceTest, HealthAndCapabilities) {
    auto [s, h] = get("/api/health");
    EXPECT_EQ(s, 200);
    EXPECT_EQ(h["status"], "ok");
    auto [s2, c] = get("/api/capabilities");
    EXPECT_EQ(s2, 200);
    EXPECT_EQ(c["bounds"]["d"]["min"], 20.0);
    EXPECT_EQ(c["palettes"].size(), 1u);
    EXPECT_EQ(c["palettes"][0]["entries"], 3);
    EXPECT_EQ(c["hybrid_models"].size(), 2u);
}

TEST_F(ServiceTest, PaletteEndpoint) {
    auto [s, p] = get("/api/palette?ambient=air&state=colored");
    EXPECT_EQ(s, 200);
    EXPECT_EQ(p["entries"].size(), 3u);
    EXPECT_EQ(p["entries"][0]["key"], "D260_W160");
    auto [s2, e] = get("/api/palette?ambient=electrolyte");
    EXPECT_EQ(s2, 400);
    EXPECT_EQ(e["field"], "ambient");
    auto [s3, e3] = get("/api/palette?state=bleached");
    EXPECT_EQ(s3, 400);
    EXPECT_EQ(e3["field"], "state");
}

TEST_F(ServiceTest, SimulateCachedAndFresh) {
    auto [s, cached] = post("/api/simulate", R"({"d": 260, "w": 160})");
    EXPECT_EQ(s, 200);
    EXPECT_TRUE(cached["cached"].get<bool>());
    EXPECT_EQ(cached["srgb_hex"], srgb_hex(tiny_palette()->at("D260_W160").color.srgb));

    auto [s2, fresh] = post("/api/simulate", R"({"d": 250, "w": 150, "t": 110})");
    EXPECT_EQ(s2, 200);
    EXPECT_FALSE(fresh["cached"].get<bool>());
    EXPECT_EQ(fresh["spectrum"].size(), grid().size());
    // The hex is reproducible from the reported xy and Y.
    auto xy = fresh["xy"].get<std::vector<double>>();
    auto c = make_color(xyY_to_xyz({xy[0], xy[1]}, fresh["Y"].get<double>()));
    EXPECT_EQ(srgb_hex(c.srgb), fresh["srgb_hex"].get<std::string>());
    for (double r : fresh["spectrum"].get<std::vector<double>>()) {
        EXPECT_GT(r, 0.0);
        EXPECT_LT(r, 1.5);
    }
}

TEST_F(ServiceTest, SimulateValidation) {
    auto [s, e] = post("/api/simulate", R"({"d": 5000, "w": 100})");
    EXPECT_EQ(s, 400);
    EXPECT_EQ(e["field"], "d");
    EXPECT_EQ(e["fields"][0]["field"], "d");
    auto [s2, e2] = post("/api/simulate", R"({"d": 200})");
    EXPECT_EQ(s2, 400);
    EXPECT_EQ(e2["field"], "w");
    auto [s3, e3] = post("/api/simulate", "not json");
    EXPECT_EQ(s3, 400);
    EXPECT_EQ(e3["field"], "body");
    auto [s4, e4] = post("/api/simulate", R"({"d": 200, "w": 100, "t": 1})");
    EXPECT_EQ(s4, 400);
    EXPECT_EQ(e4["field"], "t");
}

TEST_F(ServiceTest, SolverFailureIs422) {
    ServiceConfig cfg;
    cfg.harmonics = 80;
    start(cfg);
    auto [s, e] = post("/api/simulate", R"({"d": 250, "w": 150})");
    EXPECT_EQ(s, 422);
    EXPECT_TRUE(e.contains("error"));
}

TEST_F(ServiceTest, Hybrid) {
    auto [s, h] = post("/api/hybrid",
                       R"({"entries": ["D260_W160", "D260_W160"], "T": [100, 100], "model": "incoherent"})");
    EXPECT_EQ(s, 200);
    EXPECT_EQ(h["model"], "incoherent");
    auto pal = tiny_palette();
    auto ref = pal->at("D260_W160").spectrum.values();
    auto got = h["spectrum"].get<std::vector<double>>();
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_DOUBLE_EQ(got[i], ref[i]);
    auto [s2, e] = post("/api/hybrid", R"({"entries": ["D1_W1"], "T": [100]})");
    EXPECT_EQ(s2, 400);
    EXPECT_EQ(e["field"], "entries");
    auto [s3, e3] = post("/api/hybrid", R"({"entries": ["D260_W160"], "T": [100], "model": "quantum"})");
    EXPECT_EQ(s3, 400);
}

TEST_F(ServiceTest, Match) {
    auto pal = tiny_palette();
    const auto& want = pal->at("D240_W100");
    std::string hex = srgb_hex(want.color.srgb);
    auto [s, m] = post("/api/match", json{{"srgb_hex", hex}}.dump());
    EXPECT_EQ(s, 200);
    EXPECT_EQ(m["key"], "D240_W100");
    // The entry is slightly out of gamut, so its hex is a clipped stand-in.
    EXPECT_NEAR(m["delta_e"].get<double>(), delta_e(color_from_hex(hex), want.color), 1e-12);
    EXPECT_EQ(m["target"]["srgb_hex"], hex);
    auto [s2, e] = post("/api/match", R"({"srgb_hex": "#zz0000"})");
    EXPECT_EQ(s2, 400);
}

TEST_F(ServiceTest, Compile) {
    json body{{"width", 2}, {"height", 1}, {"pixels", {"#ffffff", "#00ffff"}}};
    auto [s, c] = post("/api/compile", body.dump());
    ASSERT_EQ(s, 200);
    EXPECT_EQ(c["layout"]["pixels"].size(), 2u);
    EXPECT_EQ(c["stats"]["pixel_count"], 2);
    EXPECT_EQ(c["layout"]["pitch_nm"][0], 900.0);
    auto bad = body;
    bad["pixels"].erase(0);
    auto [s2, e] = post("/api/compile", bad.dump());
    EXPECT_EQ(s2, 400);
    EXPECT_EQ(e["field"], "pixels");
    auto [s3, e3] = post("/api/compile", json{{"width", 1000}, {"height", 1}, {"pixels", json::array()}}.dump());
    EXPECT_EQ(s3, 413);
    auto prim = body;
    prim["primaries"] = {"D1_W1", "D240_W100", "D180_W180"};
    auto [s4, e4] = post("/api/compile", prim.dump());
    EXPECT_EQ(s4, 400);
    EXPECT_EQ(e4["field"], "primaries");
}

TEST_F(ServiceTest, ConcurrentRequests) {
    std::vector<std::thread> pool;
    std::atomic<int> ok{0};
    for (int i = 0; i < 4; ++i) {
        pool.emplace_back([&] {
            httplib::Client c("127.0.0.1", port);
            auto r = c.Post("/api/simulate", R"({"d": 270, "w": 150})", "application/json");
            if (r && r->status == 200) ++ok;
        });
    }
    for (auto& t : pool) t.join();
    EXPECT_EQ(ok, 4);
}

TEST(ServiceEnv, PortFromEnvironment) {
    ::unsetenv("RETINA_PORT");
    EXPECT_EQ(port_from_env(1234), 1234);
    ::setenv("RETINA_PORT", "9090", 1);
    EXPECT_EQ(port_from_env(), 9090);
    ::setenv("RETINA_PORT", "zero", 1);
    EXPECT_THROW(port_from_env(), ValidationError);
    ::unsetenv("RETINA_PORT");
}

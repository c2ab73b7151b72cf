// Copyright 2026 The mpaz Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpaz/server.hpp"

#include <thread>

#include <gtest/gtest.h>

namespace mpaz {
namespace {

using nlohmann::json;

int api_status(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    return e.status();
  }
  return 200;
}

std::shared_ptr<const Parameters<float>> tiny_params() {
  Rng rng(1);
  return std::make_shared<const Parameters<float>>(
      init_parameters<float>(NetworkConfig::for_game(*tic_tac_mo(), 4, 1), rng));
}

TEST(SessionManagerTest, CreateReturnsStateAndLegalMoves) {
  SessionManager mgr(nullptr, 1, 20);
  const json g = mgr.create({{"game", "tictacmo"}, {"humanSeats", {0}}});
  EXPECT_FALSE(g["id"].get<std::string>().empty());
  EXPECT_EQ(g["agent"], "mcts");
  EXPECT_EQ(g["legalMoves"].size(), 15u);
  EXPECT_EQ(g["state"]["moveCount"], 0);
  EXPECT_FALSE(g["terminal"]);
  EXPECT_EQ(g["rows"], 3);
  EXPECT_EQ(g["cols"], 5);
}

TEST(SessionManagerTest, AgentsMoveUntilHumanTurn) {
  SessionManager mgr(nullptr, 2, 20);
  const json g = mgr.create({{"game", "connect3x3"}, {"humanSeats", {2}}});
  EXPECT_EQ(g["history"].size(), 2u);
  EXPECT_EQ(g["state"]["toMove"], 2);
  EXPECT_TRUE(g.contains("lastAgentAnalysis"));
  EXPECT_EQ(g["lastAgentAnalysis"]["value"].size(), 3u);
}

TEST(SessionManagerTest, ErrorStatuses) {
  SessionManager mgr(nullptr, 3, 10);
  EXPECT_EQ(api_status([&] { mgr.create({{"game", "chess"}}); }), 400);
  EXPECT_EQ(api_status([&] { mgr.create(json::object()); }), 400);
  EXPECT_EQ(api_status([&] { mgr.create({{"game", "tictacmo"}, {"agent", "alphazero"}}); }), 400);
  EXPECT_EQ(api_status([&] { mgr.create({{"game", "tictacmo"}, {"humanSeats", {5}}}); }), 400);
  EXPECT_EQ(api_status([&] { mgr.get("nope"); }), 404);
  EXPECT_EQ(api_status([&] { mgr.move("nope", {{"move", 0}}); }), 404);

  const std::string id = mgr.create({{"game", "tictacmo"}, {"humanSeats", {0}}})["id"];
  EXPECT_EQ(api_status([&] { mgr.move(id, {{"move", 99}}); }), 422);
  EXPECT_EQ(api_status([&] { mgr.move(id, json::object()); }), 400);
  mgr.move(id, {{"move", 7}});
  EXPECT_EQ(api_status([&] { mgr.move(id, {{"move", 7}}); }), 422);  // occupied
}

TEST(SessionManagerTest, AnalysisDoesNotMutate) {
  SessionManager mgr(tiny_params(), 4, 30);
  const json g = mgr.create({{"game", "tictacmo"}, {"humanSeats", {0, 1}}});
  const std::string id = g["id"];
  EXPECT_EQ(g["agent"], "alphazero");
  const json a = mgr.analysis(id);
  EXPECT_EQ(a["pi"].size(), 15u);
  EXPECT_EQ(a["value"].size(), 3u);
  double sum = 0.0;
  for (double p : a["pi"]) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(mgr.get(id), g);
  EXPECT_EQ(mgr.analysis(id), a);  // same position, same answer
}

TEST(SessionManagerTest, HistoryReplaysToCurrentState) {
  SessionManager mgr(nullptr, 5, 15);
  const std::string id = mgr.create({{"game", "tictacmo"}, {"humanSeats", {1}}})["id"];
  Rng rng(6);
  json g = mgr.get(id);
  while (!g["terminal"]) {
    const auto& legal = g["legalMoves"];
    g = mgr.move(id, {{"move", legal[rng() % legal.size()]}});
  }
  GameState s = initial_state(tic_tac_mo());
  for (int m : g["history"]) s = apply_move(s, Move{m});
  EXPECT_EQ(s, state_from_json(g["state"]));
  EXPECT_EQ(mgr.find(id)->replay(), mgr.find(id)->state());
  EXPECT_EQ(g["scores"], json(*terminal_scores(s)));
  EXPECT_EQ(api_status([&] { mgr.move(id, {{"move", 0}}); }), 422);
}

TEST(SessionManagerTest, ListsSessions) {
  SessionManager mgr(nullptr, 7, 10);
  mgr.create({{"game", "tictacmo"}, {"humanSeats", {0}}});
  mgr.create({{"game", "connect3x3"}, {"humanSeats", {0}}, {"agent", "random"}});
  const json l = mgr.list();
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[1]["game"], "connect3x3");
  EXPECT_EQ(l[0]["moveCount"], 0);
}

class HttpApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    install_routes(server_, manager_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  SessionManager manager_{nullptr, 8, 15};
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpApiTest, EndToEnd) {
  auto c = client();
  auto r = c.Post("/api/game", R"({"game":"tictacmo","humanSeats":[0]})", "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const json g = json::parse(r->body);
  const std::string id = g["id"];
  EXPECT_EQ(g["legalMoves"].size(), 15u);

  r = c.Post("/api/game/" + id + "/move", R"({"move":42})", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
  EXPECT_TRUE(json::parse(r->body).contains("error"));

  r = c.Post("/api/game/" + id + "/move", R"({"move":3})", "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const json after = json::parse(r->body);
  EXPECT_EQ(after["history"][0], 3);
  EXPECT_EQ(after["history"].size(), 3u);

  r = c.Get("/api/game/" + id + "/analysis");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["value"].size(), 3u);

  r = c.Get("/api/game/" + id);
  ASSERT_TRUE(r);
  EXPECT_EQ(json::parse(r->body), after);

  r = c.Get("/api/game/missing");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);

  r = c.Post("/api/game", "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);

  r = c.Get("/api/games");
  ASSERT_TRUE(r);
  EXPECT_EQ(json::parse(r->body).size(), 1u);
}

}  // namespace
}  // namespace mpaz

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

#ifndef MPAZ_SERVER_HPP_
#define MPAZ_SERVER_HPP_

// Human-vs-agent game sessions over JSON/HTTP.
//
//   POST /api/game                {game, humanSeats, agent?, rollouts?}
//   GET  /api/game/{id}
//   POST /api/game/{id}/move      {move}
//   GET  /api/game/{id}/analysis  -> {pi, value}
//   GET  /api/games
//
// Agent seats move synchronously inside the request that hands them the
// turn, so every response shows the game waiting on a human or finished.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mpaz/arena.hpp"
#include "mpaz/game.hpp"
#include "mpaz/mcts.hpp"
#include "mpaz/network.hpp"
#include "mpaz/util.hpp"

namespace mpaz {

inline constexpr int kHumanFacingRollouts = 500;

class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct Analysis {
  std::vector<double> pi;  // dense over the action space
  ValueVector value;
};

struct SessionOptions {
  std::string game;
  std::vector<int> human_seats;
  AgentKind agent = AgentKind::kAlphaZero;
  int rollouts = kHumanFacingRollouts;
};

class Session {
 public:
  Session(std::string id, const SessionOptions& opts,
          std::shared_ptr<const Parameters<float>> params, uint64_t seed)
      : id_(std::move(id)),
        game_(game_by_name(opts.game)),
        human_(game_->num_players, false),
        agent_(opts.agent),
        rollouts_(opts.rollouts),
        params_(std::move(params)),
        state_(initial_state(game_)),
        rng_(seed),
        analysis_seed_(derive_seed(seed, {1})) {
    if (rollouts_ < 1) throw ApiError(400, "rollouts must be >= 1");
    if (agent_ == AgentKind::kAlphaZero && !params_) {
      throw ApiError(400, "alphazero agent requested but no checkpoint is loaded");
    }
    if (agent_ == AgentKind::kHumanProxy) throw ApiError(400, "unsupported agent kind");
    for (int s : opts.human_seats) {
      if (s < 0 || s >= game_->num_players) {
        throw ApiError(400, "human seat out of range: " + std::to_string(s));
      }
      human_[s] = true;
    }
    advance_agents();
  }

  const std::string& id() const { return id_; }
  std::mutex& mutex() { return mu_; }

  nlohmann::json to_json() const {
    nlohmann::json legal = nlohmann::json::array();
    for (Move m : legal_moves(state_)) legal.push_back(m.index);
    nlohmann::json history = nlohmann::json::array();
    for (Move m : history_) history.push_back(m.index);
    nlohmann::json humans = nlohmann::json::array();
    for (int s = 0; s < game_->num_players; ++s) {
      if (human_[s]) humans.push_back(s);
    }
    const auto z = terminal_scores(state_);
    nlohmann::json j = {{"id", id_},
                        {"game", game_->name},
                        {"rows", game_->board_rows},
                        {"cols", game_->board_cols},
                        {"gravity", game_->gravity},
                        {"state", mpaz::to_json(state_)},
                        {"legalMoves", std::move(legal)},
                        {"history", std::move(history)},
                        {"humanSeats", std::move(humans)},
                        {"agent", agent_name(agent_)},
                        {"rollouts", rollouts_},
                        {"terminal", z.has_value()},
                        {"scores", z ? nlohmann::json(*z) : nlohmann::json(nullptr)}};
    if (last_agent_analysis_) {
      j["lastAgentAnalysis"] = {{"pi", last_agent_analysis_->pi},
                                {"value", last_agent_analysis_->value}};
    }
    return j;
  }

  void human_move(int index) {
    if (state_.is_terminal()) throw ApiError(422, "game is over");
    if (!human_[state_.to_move()]) {
      throw ApiError(422, "it is not a human seat's turn");
    }
    if (!is_legal(state_, Move{index})) {
      throw ApiError(422, "illegal move " + std::to_string(index));
    }
    play(Move{index});
    advance_agents();
  }

  // Fresh search of a copy of the current position; never mutates the game.
  Analysis analyze() {
    if (state_.is_terminal()) return {{}, *terminal_scores(state_)};
    // Own stream so analysis never shifts the agents' random draws.
    Rng rng(derive_seed(analysis_seed_, {history_.size()}));
    return search(state_, rng).second;
  }

  // Replays the move history from the initial position.
  GameState replay() const {
    GameState s = initial_state(game_);
    for (Move m : history_) s = apply_move(s, m);
    return s;
  }

  const GameState& state() const { return state_; }

  static const char* agent_name(AgentKind k) {
    switch (k) {
      case AgentKind::kAlphaZero: return "alphazero";
      case AgentKind::kMcts: return "mcts";
      case AgentKind::kRandom: return "random";
      case AgentKind::kHumanProxy: return "human";
    }
    return "?";
  }

 private:
  void play(Move m) {
    state_ = apply_move(state_, m);
    history_.push_back(m);
  }

  std::pair<Move, Analysis> search(const GameState& state, Rng& rng) {
    SearchConfig config;
    config.rollouts_per_turn = rollouts_;
    config.temperature = 0.0;
    const int actions = game_->action_space_size;
    if (agent_ == AgentKind::kRandom) {
      const std::vector<Move> moves = legal_moves(state);
      std::vector<double> pi(actions, 0.0);
      for (Move m : moves) pi[m.index] = 1.0 / static_cast<double>(moves.size());
      const Move m = moves[std::uniform_int_distribution<size_t>(0, moves.size() - 1)(rng)];
      return {m, {std::move(pi), ValueVector(game_->num_players, 0.0)}};
    }
    std::unique_ptr<SearchNode> root;
    if (agent_ == AgentKind::kAlphaZero) {
      NetworkEvaluator<float> evaluator(params_);
      root = build_search_tree(state, evaluator, config, rng);
    } else {
      root = build_uct_tree(state, config, rng);
    }
    const MoveDistribution visits = visit_distribution(*root, 1.0);
    const Move best = visit_distribution(*root, 0.0).argmax();
    return {best, {visits.dense(actions), root_value(*root)}};
  }

  void advance_agents() {
    while (!state_.is_terminal() && !human_[state_.to_move()]) {
      auto [move, analysis] = search(state_, rng_);
      last_agent_analysis_ = std::move(analysis);
      play(move);
    }
  }

  std::string id_;
  GamePtr game_;
  std::vector<bool> human_;
  AgentKind agent_;
  int rollouts_;
  std::shared_ptr<const Parameters<float>> params_;
  GameState state_;
  std::vector<Move> history_;
  std::optional<Analysis> last_agent_analysis_;
  Rng rng_;
  uint64_t analysis_seed_;
  std::mutex mu_;
};

class SessionManager {
 public:
  SessionManager(std::shared_ptr<const Parameters<float>> params, uint64_t seed,
                 int default_rollouts = kHumanFacingRollouts)
      : params_(std::move(params)), seed_(seed), default_rollouts_(default_rollouts) {}

  nlohmann::json create(const nlohmann::json& body) {
    SessionOptions opts;
    try {
      opts.game = body.at("game").get<std::string>();
      if (body.contains("humanSeats")) {
        opts.human_seats = body.at("humanSeats").get<std::vector<int>>();
      }
      opts.rollouts = body.value("rollouts", default_rollouts_);
      const std::string agent = body.value("agent", params_ ? "alphazero" : "mcts");
      if (agent == "alphazero") {
        opts.agent = AgentKind::kAlphaZero;
      } else if (agent == "mcts") {
        opts.agent = AgentKind::kMcts;
      } else if (agent == "random") {
        opts.agent = AgentKind::kRandom;
      } else {
        throw ApiError(400, "unknown agent '" + agent + "'");
      }
      game_by_name(opts.game);
    } catch (const nlohmann::json::exception& e) {
      throw ApiError(400, std::string("bad request: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ApiError(400, e.what());
    }
    std::shared_ptr<Session> session;
    std::string id;
    uint64_t seed;
    {
      std::lock_guard<std::mutex> lock(mu_);
      id = "g" + std::to_string(++next_id_);
      seed = derive_seed(seed_, {next_id_});
    }
    // Agents may search here; build outside the registry lock.
    session = std::make_shared<Session>(id, opts, params_, seed);
    nlohmann::json out = session->to_json();
    std::lock_guard<std::mutex> lock(mu_);
    sessions_[id] = std::move(session);
    return out;
  }

  nlohmann::json get(const std::string& id) {
    auto s = find(id);
    std::lock_guard<std::mutex> lock(s->mutex());
    return s->to_json();
  }

  nlohmann::json move(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    int index = 0;
    try {
      index = body.at("move").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ApiError(400, std::string("bad request: ") + e.what());
    }
    std::lock_guard<std::mutex> lock(s->mutex());
    s->human_move(index);
    return s->to_json();
  }

  nlohmann::json analysis(const std::string& id) {
    auto s = find(id);
    std::lock_guard<std::mutex> lock(s->mutex());
    const Analysis a = s->analyze();
    return {{"pi", a.pi}, {"value", a.value}};
  }

  nlohmann::json list() {
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& [_, s] : sessions_) all.push_back(s);
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : all) {
      std::lock_guard<std::mutex> lock(s->mutex());
      const nlohmann::json j = s->to_json();
      out.push_back({{"id", j["id"]},
                     {"game", j["game"]},
                     {"moveCount", j["state"]["moveCount"]},
                     {"terminal", j["terminal"]}});
    }
    return out;
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ApiError(404, "unknown session '" + id + "'");
    return it->second;
  }

 private:
  std::shared_ptr<const Parameters<float>> params_;
  uint64_t seed_;
  int default_rollouts_;
  std::mutex mu_;
  uint64_t next_id_ = 0;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

inline void install_routes(httplib::Server& server, SessionManager& manager) {
  auto respond = [](httplib::Response& res, auto&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const ApiError& e) {
      res.status = e.status();
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      throw ApiError(400, "request body is not valid JSON");
    }
  };
  server.Post("/api/game", [&, respond, parse_body](const httplib::Request& req,
                                                    httplib::Response& res) {
    respond(res, [&] { return manager.create(parse_body(req)); });
  });
  server.Get("/api/games", [&, respond](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return manager.list(); });
  });
  server.Get(R"(/api/game/([^/]+))", [&, respond](const httplib::Request& req,
                                                  httplib::Response& res) {
    respond(res, [&] { return manager.get(req.matches[1]); });
  });
  server.Post(R"(/api/game/([^/]+)/move)", [&, respond, parse_body](const httplib::Request& req,
                                                                    httplib::Response& res) {
    respond(res, [&] { return manager.move(req.matches[1], parse_body(req)); });
  });
  server.Get(R"(/api/game/([^/]+)/analysis)", [&, respond](const httplib::Request& req,
                                                           httplib::Response& res) {
    respond(res, [&] { return manager.analysis(req.matches[1]); });
  });
}

}  // namespace mpaz

#endif  // MPAZ_SERVER_HPP_

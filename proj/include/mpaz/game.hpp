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

#ifndef MPAZ_GAME_HPP_
#define MPAZ_GAME_HPP_

// N-player k-in-a-row games on a rectangular grid, with or without gravity.
// Tic-Tac-Mo and Connect 3x3 are the two shipped rule sets; the same
// machinery also builds small oracle games (e.g. 2-player 3x3 Tic-Tac-Toe).

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mpaz {

using PlayerId = int;
using ScoreVector = std::vector<double>;
using ValueVector = std::vector<double>;

struct Move {
  int index = 0;
  auto operator<=>(const Move&) const = default;
};

struct GameDescriptor {
  std::string name;
  int num_players = 3;
  int board_rows = 0;
  int board_cols = 0;
  int action_space_size = 0;
  int encoding_planes = 0;
  int line_length = 3;
  bool gravity = false;

  int num_cells() const { return board_rows * board_cols; }
};

using GamePtr = std::shared_ptr<const GameDescriptor>;

// Builds a k-in-a-row game. Without gravity a move is a flat row-major cell
// index; with gravity a move is a column index.
inline GamePtr make_line_game(std::string name, int num_players, int rows,
                              int cols, int line_length, bool gravity) {
  if (num_players < 2 || rows < 1 || cols < 1 || line_length < 1) {
    throw std::invalid_argument("make_line_game: bad dimensions");
  }
  auto g = std::make_shared<GameDescriptor>();
  g->name = std::move(name);
  g->num_players = num_players;
  g->board_rows = rows;
  g->board_cols = cols;
  g->action_space_size = gravity ? cols : rows * cols;
  g->encoding_planes = 2 * num_players;
  g->line_length = line_length;
  g->gravity = gravity;
  return g;
}

inline const GamePtr& tic_tac_mo() {
  static const GamePtr game = make_line_game("tictacmo", 3, 3, 5, 3, false);
  return game;
}

inline const GamePtr& connect3x3() {
  static const GamePtr game = make_line_game("connect3x3", 3, 6, 7, 3, true);
  return game;
}

// Two-player 3x3 Tic-Tac-Toe, used for solver cross-checks.
inline const GamePtr& tic_tac_toe() {
  static const GamePtr game = make_line_game("tictactoe", 2, 3, 3, 3, false);
  return game;
}

inline GamePtr game_by_name(const std::string& name) {
  if (name == "tictacmo") return tic_tac_mo();
  if (name == "connect3x3") return connect3x3();
  if (name == "tictactoe") return tic_tac_toe();
  throw std::invalid_argument("unknown game: '" + name + "'");
}

class IllegalMoveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Position plus player-to-move. Immutable once built; apply_move returns a
// fresh value.
class GameState {
 public:
  static constexpr int8_t kEmpty = -1;

  explicit GameState(GamePtr game)
      : game_(std::move(game)), cells_(game_->num_cells(), kEmpty) {}

  // Validates occupancy counts and gravity, then derives to_move and the
  // winner. Throws std::invalid_argument on an unreachable layout.
  static GameState from_cells(GamePtr game, std::vector<int8_t> cells);

  const GameDescriptor& game() const { return *game_; }
  const GamePtr& game_ptr() const { return game_; }
  PlayerId to_move() const { return move_count_ % game_->num_players; }
  int move_count() const { return move_count_; }
  // Player who completed a line, or kEmpty.
  int winner() const { return winner_; }
  const std::vector<int8_t>& cells() const { return cells_; }
  int cell(int row, int col) const {
    return cells_[row * game_->board_cols + col];
  }
  bool is_full() const { return move_count_ == game_->num_cells(); }
  bool is_terminal() const { return winner_ != kEmpty || is_full(); }

  bool operator==(const GameState& other) const {
    return game_->name == other.game_->name && cells_ == other.cells_;
  }

 private:
  friend GameState apply_move(const GameState& state, Move move);

  bool completes_line(int row, int col) const;

  GamePtr game_;
  std::vector<int8_t> cells_;
  int move_count_ = 0;
  int winner_ = kEmpty;
};

inline GameState initial_state(const GamePtr& game) { return GameState(game); }

inline bool GameState::completes_line(int row, int col) const {
  const int player = cell(row, col);
  if (player == kEmpty) return false;
  static constexpr int kDirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  const int rows = game_->board_rows;
  const int cols = game_->board_cols;
  for (const auto& d : kDirs) {
    int run = 1;
    for (int sign : {1, -1}) {
      int r = row + sign * d[0];
      int c = col + sign * d[1];
      while (r >= 0 && r < rows && c >= 0 && c < cols &&
             cell(r, c) == player) {
        ++run;
        r += sign * d[0];
        c += sign * d[1];
      }
    }
    if (run >= game_->line_length) return true;
  }
  return false;
}

inline GameState GameState::from_cells(GamePtr game, std::vector<int8_t> cells) {
  GameState s(std::move(game));
  const GameDescriptor& g = *s.game_;
  if (static_cast<int>(cells.size()) != g.num_cells()) {
    throw std::invalid_argument("from_cells: wrong cell count");
  }
  std::vector<int> per_player(g.num_players, 0);
  for (int8_t v : cells) {
    if (v == kEmpty) continue;
    if (v < 0 || v >= g.num_players) {
      throw std::invalid_argument("from_cells: bad player id");
    }
    ++per_player[v];
  }
  // Players rotate from seat 0, so earlier seats hold at most one extra piece.
  int total = 0;
  for (int p = 0; p < g.num_players; ++p) total += per_player[p];
  for (int p = 0; p < g.num_players; ++p) {
    const int expected = total / g.num_players + (p < total % g.num_players);
    if (per_player[p] != expected) {
      throw std::invalid_argument("from_cells: piece counts violate rotation");
    }
  }
  if (g.gravity) {
    for (int c = 0; c < g.board_cols; ++c) {
      bool seen_empty_below = false;
      for (int r = g.board_rows - 1; r >= 0; --r) {
        const bool empty = cells[r * g.board_cols + c] == kEmpty;
        if (empty) {
          seen_empty_below = true;
        } else if (seen_empty_below) {
          throw std::invalid_argument("from_cells: floating piece");
        }
      }
    }
  }
  s.cells_ = std::move(cells);
  s.move_count_ = total;
  int winners = 0;
  for (int r = 0; r < g.board_rows; ++r) {
    for (int c = 0; c < g.board_cols; ++c) {
      if (s.completes_line(r, c)) {
        const int p = s.cell(r, c);
        if (s.winner_ != p) ++winners;
        s.winner_ = p;
      }
    }
  }
  if (winners > 1) {
    throw std::invalid_argument("from_cells: more than one player has a line");
  }
  return s;
}

inline std::vector<Move> legal_moves(const GameState& state) {
  std::vector<Move> moves;
  if (state.is_terminal()) return moves;
  const GameDescriptor& g = state.game();
  if (g.gravity) {
    for (int c = 0; c < g.board_cols; ++c) {
      if (state.cell(0, c) == GameState::kEmpty) moves.push_back({c});
    }
  } else {
    for (int i = 0; i < g.num_cells(); ++i) {
      if (state.cells()[i] == GameState::kEmpty) moves.push_back({i});
    }
  }
  return moves;
}

// Dense action-space mask of legal moves.
inline std::vector<bool> legal_mask(const GameState& state) {
  std::vector<bool> mask(state.game().action_space_size, false);
  for (Move m : legal_moves(state)) mask[m.index] = true;
  return mask;
}

inline bool is_legal(const GameState& state, Move move) {
  const GameDescriptor& g = state.game();
  if (state.is_terminal()) return false;
  if (move.index < 0 || move.index >= g.action_space_size) return false;
  if (g.gravity) return state.cell(0, move.index) == GameState::kEmpty;
  return state.cells()[move.index] == GameState::kEmpty;
}

inline GameState apply_move(const GameState& state, Move move) {
  if (!is_legal(state, move)) {
    throw IllegalMoveError("illegal move " + std::to_string(move.index) +
                           " in " + state.game().name);
  }
  const GameDescriptor& g = state.game();
  int row = 0;
  int col = 0;
  if (g.gravity) {
    col = move.index;
    row = g.board_rows - 1;
    while (state.cell(row, col) != GameState::kEmpty) --row;
  } else {
    row = move.index / g.board_cols;
    col = move.index % g.board_cols;
  }
  GameState next = state;
  next.cells_[row * g.board_cols + col] = static_cast<int8_t>(state.to_move());
  ++next.move_count_;
  if (next.completes_line(row, col)) next.winner_ = state.to_move();
  return next;
}

// +1 for the line maker and -1 for everyone else; all zeros on a full board
// without a line; nullopt while the game is running.
inline std::optional<ScoreVector> terminal_scores(const GameState& state) {
  const int n = state.game().num_players;
  if (state.winner() != GameState::kEmpty) {
    ScoreVector z(n, -1.0);
    z[state.winner()] = 1.0;
    return z;
  }
  if (state.is_full()) return ScoreVector(n, 0.0);
  return std::nullopt;
}

// Board planes in rows x cols x planes order: plane 2p marks player p's
// pieces, plane 2p+1 is all ones when p is to move.
struct StateTensor {
  int rows = 0;
  int cols = 0;
  int planes = 0;
  std::vector<float> data;

  float at(int r, int c, int p) const {
    return data[(static_cast<size_t>(r) * cols + c) * planes + p];
  }
  float& at(int r, int c, int p) {
    return data[(static_cast<size_t>(r) * cols + c) * planes + p];
  }
};

inline StateTensor encode_state(const GameState& state) {
  const GameDescriptor& g = state.game();
  StateTensor t{g.board_rows, g.board_cols, g.encoding_planes,
                std::vector<float>(
                    static_cast<size_t>(g.num_cells()) * g.encoding_planes, 0.f)};
  const int mover = state.to_move();
  for (int r = 0; r < g.board_rows; ++r) {
    for (int c = 0; c < g.board_cols; ++c) {
      const int owner = state.cell(r, c);
      if (owner != GameState::kEmpty) t.at(r, c, 2 * owner) = 1.f;
      t.at(r, c, 2 * mover + 1) = 1.f;
    }
  }
  return t;
}

// Inverse of encode_state for the piece planes. Used to recover legal-move
// masks from stored training samples.
inline GameState decode_state(const GamePtr& game, const StateTensor& t) {
  std::vector<int8_t> cells(game->num_cells(), GameState::kEmpty);
  for (int r = 0; r < t.rows; ++r) {
    for (int c = 0; c < t.cols; ++c) {
      for (int p = 0; p < game->num_players; ++p) {
        if (t.at(r, c, 2 * p) > 0.5f) {
          cells[r * t.cols + c] = static_cast<int8_t>(p);
        }
      }
    }
  }
  return GameState::from_cells(game, std::move(cells));
}

inline char player_glyph(int player) {
  static constexpr char kGlyphs[] = {'X', 'O', 'Y'};
  if (player == GameState::kEmpty) return '.';
  if (player < 3) return kGlyphs[player];
  return static_cast<char>('0' + player % 10);
}

inline std::string render(const GameState& state) {
  const GameDescriptor& g = state.game();
  std::string out;
  for (int r = 0; r < g.board_rows; ++r) {
    for (int c = 0; c < g.board_cols; ++c) out += player_glyph(state.cell(r, c));
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const GameState& state) {
  const GameDescriptor& g = state.game();
  nlohmann::json cells = nlohmann::json::array();
  for (int r = 0; r < g.board_rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < g.board_cols; ++c) {
      const int v = state.cell(r, c);
      if (v == GameState::kEmpty) {
        row.push_back(nullptr);
      } else {
        row.push_back(v);
      }
    }
    cells.push_back(std::move(row));
  }
  return {{"game", g.name},
          {"cells", std::move(cells)},
          {"toMove", state.to_move()},
          {"moveCount", state.move_count()}};
}

inline GameState state_from_json(const nlohmann::json& j) {
  GamePtr game = game_by_name(j.at("game").get<std::string>());
  std::vector<int8_t> cells;
  for (const auto& row : j.at("cells")) {
    for (const auto& v : row) {
      cells.push_back(v.is_null() ? GameState::kEmpty
                                  : static_cast<int8_t>(v.get<int>()));
    }
  }
  return GameState::from_cells(std::move(game), std::move(cells));
}

}  // namespace mpaz

#endif  // MPAZ_GAME_HPP_

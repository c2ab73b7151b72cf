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

#include "mpaz/game.hpp"

#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"

namespace mpaz {
namespace {

using oracle::play;

TEST(GameTest, InitialStates) {
  GameState ttm = initial_state(tic_tac_mo());
  EXPECT_EQ(ttm.to_move(), 0);
  EXPECT_EQ(ttm.move_count(), 0);
  EXPECT_EQ(legal_moves(ttm).size(), 15u);
  EXPECT_FALSE(terminal_scores(ttm).has_value());

  GameState c3 = initial_state(connect3x3());
  EXPECT_EQ(c3.to_move(), 0);
  EXPECT_EQ(c3.game().num_cells(), 42);
  const std::vector<Move> moves = legal_moves(c3);
  ASSERT_EQ(moves.size(), 7u);
  for (int c = 0; c < 7; ++c) EXPECT_EQ(moves[c].index, c);
}

TEST(GameTest, FullColumnExcluded) {
  // Alternate columns 3 and 0/1 so nobody completes a line in column 3.
  GameState s = play(connect3x3(), {3, 3, 0, 3, 3, 1, 3, 3});
  ASSERT_FALSE(s.is_terminal());
  EXPECT_NE(s.cell(0, 3), GameState::kEmpty);
  const std::vector<Move> moves = legal_moves(s);
  EXPECT_EQ(moves.size(), 6u);
  for (Move m : moves) EXPECT_NE(m.index, 3);
  EXPECT_THROW(apply_move(s, Move{3}), IllegalMoveError);
}

TEST(GameTest, ApplyMovePlacesPiece) {
  GameState s = apply_move(initial_state(tic_tac_mo()), Move{0});
  EXPECT_EQ(s.cell(0, 0), 0);
  EXPECT_EQ(s.to_move(), 1);
  EXPECT_EQ(s.move_count(), 1);
}

TEST(GameTest, GravityStacksBottomUp) {
  GameState s = play(connect3x3(), {2});
  EXPECT_EQ(s.cell(5, 2), 0);
  s = apply_move(s, Move{2});
  EXPECT_EQ(s.cell(4, 2), 1);
  EXPECT_EQ(s.cell(3, 2), GameState::kEmpty);
}

TEST(GameTest, OccupiedCellRejected) {
  GameState s = play(tic_tac_mo(), {7});
  EXPECT_THROW(apply_move(s, Move{7}), IllegalMoveError);
  EXPECT_THROW(apply_move(s, Move{-1}), IllegalMoveError);
  EXPECT_THROW(apply_move(s, Move{15}), IllegalMoveError);
}

TEST(GameTest, RowWinScores) {
  // Player 0 takes 0,1,2; players 1 and 2 play on the bottom row.
  GameState s = play(tic_tac_mo(), {0, 10, 11, 1, 12, 13, 2});
  ASSERT_TRUE(s.is_terminal());
  EXPECT_EQ(*terminal_scores(s), (ScoreVector{1, -1, -1}));
  EXPECT_TRUE(legal_moves(s).empty());
}

TEST(GameTest, ColumnAndDiagonalWins) {
  // Player 1 holds column 1: cells 1, 6, 11.
  GameState col = play(tic_tac_mo(), {0, 1, 2, 3, 6, 4, 5, 11});
  EXPECT_EQ(*terminal_scores(col), (ScoreVector{-1, 1, -1}));
  // Player 2 holds the diagonal 2, 8, 14.
  GameState diag = play(tic_tac_mo(), {0, 1, 2, 3, 4, 8, 5, 6, 14});
  EXPECT_EQ(*terminal_scores(diag), (ScoreVector{-1, -1, 1}));
  // Anti-diagonal 4, 8, 12 for player 0.
  GameState anti = play(tic_tac_mo(), {4, 0, 1, 8, 2, 3, 12});
  EXPECT_EQ(*terminal_scores(anti), (ScoreVector{1, -1, -1}));
}

TEST(GameTest, FullBoardTie) {
  // Five pieces each, no three in a row in any direction.
  const std::vector<int8_t> cells = {0, 0, 1, 1, 2,  //
                                     1, 2, 2, 0, 0,  //
                                     2, 0, 1, 1, 2};
  GameState s = GameState::from_cells(tic_tac_mo(), cells);
  ASSERT_TRUE(s.is_terminal());
  EXPECT_EQ(*terminal_scores(s), (ScoreVector{0, 0, 0}));
}

TEST(GameTest, EncodingShapes) {
  StateTensor t = encode_state(initial_state(tic_tac_mo()));
  EXPECT_EQ(t.rows, 3);
  EXPECT_EQ(t.cols, 5);
  EXPECT_EQ(t.planes, 6);
  EXPECT_EQ(t.data.size(), 90u);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) {
      for (int p = 0; p < 3; ++p) EXPECT_EQ(t.at(r, c, 2 * p), 0.f);
      EXPECT_EQ(t.at(r, c, 1), 1.f);
      EXPECT_EQ(t.at(r, c, 3), 0.f);
      EXPECT_EQ(t.at(r, c, 5), 0.f);
    }
  }
  StateTensor c = encode_state(play(connect3x3(), {0, 1, 2}));
  EXPECT_EQ(c.rows, 6);
  EXPECT_EQ(c.cols, 7);
  EXPECT_EQ(c.planes, 6);
  EXPECT_EQ(c.data.size(), 252u);
}

TEST(GameTest, OneMoveOnePieceInPlaneZero) {
  StateTensor t = encode_state(play(tic_tac_mo(), {6}));
  float sum = 0.f;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) sum += t.at(r, c, 0);
  }
  EXPECT_EQ(sum, 1.f);
  EXPECT_EQ(t.at(1, 1, 0), 1.f);
  EXPECT_EQ(t.at(0, 0, 3), 1.f);  // player 1 to move
}

TEST(GameTest, FromCellsRejectsUnreachable) {
  std::vector<int8_t> cells(15, GameState::kEmpty);
  cells[0] = 1;  // player 1 moved before player 0
  EXPECT_THROW(GameState::from_cells(tic_tac_mo(), cells), std::invalid_argument);
  std::vector<int8_t> floating(42, GameState::kEmpty);
  floating[0] = 0;  // top-left with nothing below
  EXPECT_THROW(GameState::from_cells(connect3x3(), floating), std::invalid_argument);
}

TEST(GameTest, JsonRoundTrip) {
  GameState s = play(connect3x3(), {3, 3, 4, 2});
  const nlohmann::json j = to_json(s);
  EXPECT_EQ(j.at("toMove"), 1);
  EXPECT_EQ(j.at("moveCount"), 4);
  EXPECT_TRUE(j.at("cells")[0][0].is_null());
  EXPECT_EQ(j.at("cells")[5][3], 0);
  EXPECT_EQ(state_from_json(j), s);
}

TEST(GameTest, DecodeInvertsEncode) {
  GameState s = play(tic_tac_mo(), {0, 5, 9, 14});
  EXPECT_EQ(decode_state(tic_tac_mo(), encode_state(s)), s);
}

// Random playouts on both games: occupancy, gravity, rotation, plane sums,
// score sums and bounded length.
void check_random_playouts(const GamePtr& game, int playouts, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int cells = game->num_cells();
  for (int p = 0; p < playouts; ++p) {
    GameState s = initial_state(game);
    int k = 0;
    while (!s.is_terminal()) {
      ASSERT_EQ(s.to_move(), k % game->num_players);
      const std::vector<Move> moves = legal_moves(s);
      ASSERT_FALSE(moves.empty());
      std::uniform_int_distribution<size_t> pick(0, moves.size() - 1);
      const GameState next = apply_move(s, moves[pick(rng)]);
      ++k;
      ASSERT_EQ(next.move_count(), k);
      int occupied = 0;
      for (int i = 0; i < cells; ++i) {
        if (s.cells()[i] != GameState::kEmpty) {
          ASSERT_EQ(next.cells()[i], s.cells()[i]) << "piece overwritten";
        }
        occupied += next.cells()[i] != GameState::kEmpty;
      }
      ASSERT_EQ(occupied, k);
      if (game->gravity) {
        for (int c = 0; c < game->board_cols; ++c) {
          for (int r = 0; r + 1 < game->board_rows; ++r) {
            if (next.cell(r, c) != GameState::kEmpty) {
              ASSERT_NE(next.cell(r + 1, c), GameState::kEmpty) << "floating piece";
            }
          }
        }
      }
      const StateTensor t = encode_state(next);
      float pieces = 0.f;
      for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.cols; ++c) {
          for (int q = 0; q < game->num_players; ++q) pieces += t.at(r, c, 2 * q);
        }
      }
      ASSERT_EQ(static_cast<int>(pieces), next.move_count());
      s = next;
    }
    ASSERT_LE(k, cells);
    const ScoreVector z = *terminal_scores(s);
    const double sum = std::accumulate(z.begin(), z.end(), 0.0);
    ASSERT_TRUE(sum == 0.0 || sum == -1.0 * (game->num_players - 2)) << sum;
  }
}

TEST(GamePropertyTest, TicTacMoRandomPlayouts) {
  check_random_playouts(tic_tac_mo(), 10000, 1);
}

TEST(GamePropertyTest, Connect3x3RandomPlayouts) {
  check_random_playouts(connect3x3(), 10000, 2);
}

}  // namespace
}  // namespace mpaz

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "lorel/baselines.hpp"
#include "lorel/errors.hpp"

using namespace lorel;

namespace {

// Two instruction groups, each demonstrated with its own constant action.
// All episodes visit the same states, so only the instruction can
// disambiguate which action to produce.
data::Dataset cloning_dataset() {
  data::Dataset d;
  d.horizon = 4;
  for (int i = 0; i < 20; ++i) {
    data::Episode e;
    e.seed = 100 + static_cast<std::uint64_t>(i);
    bool open_group = i % 2 == 0;
    e.instruction = sim::canonical_instruction(open_group ? sim::TaskId::kOpenDrawer
                                                          : sim::TaskId::kCloseDrawer);
    std::array<double, 2> a =
        open_group ? std::array<double, 2>{0.02, -0.01} : std::array<double, 2>{-0.02, 0.01};
    for (int t = 0; t <= d.horizon; ++t)
      e.states.push_back(sim::state_vector(sim::reset(500 + static_cast<std::uint64_t>(t))));
    for (int t = 0; t < d.horizon; ++t) e.actions.push_back(a);
    d.episodes.push_back(e);
  }
  return d;
}

base::BCTrainConfig fast_bc_cfg() {
  base::BCTrainConfig cfg;
  cfg.steps = 800;
  cfg.eval_every = 200;
  cfg.learning_rate = 1e-3;
  cfg.dataset_hash = "bcdeadbeef";
  return cfg;
}

// Hand-built episodes with recognizable cell values so batch rows can be
// matched back to their source exactly.
data::Dataset marker_dataset() {
  data::Dataset d;
  d.horizon = 3;
  for (int e = 0; e < 2; ++e) {
    data::Episode ep;
    ep.seed = static_cast<std::uint64_t>(e);
    ep.instruction = e == 0 ? "alpha" : "beta";
    for (int t = 0; t <= d.horizon; ++t) {
      sim::StateVec v{};
      for (int k = 0; k < 9; ++k) v[static_cast<std::size_t>(k)] = e + t * 0.1 + k * 0.01;
      ep.states.push_back(v);
    }
    for (int t = 0; t < d.horizon; ++t)
      ep.actions.push_back({0.01 * (e + 1), -0.01 * (t + 1)});
    d.episodes.push_back(ep);
  }
  return d;
}

Eigen::MatrixXd marker_embeddings() {
  Eigen::MatrixXd embs(2, lang::kEmbedDim);
  embs.row(0).setConstant(10.0);
  embs.row(1).setConstant(20.0);
  return embs;
}

void zero_head(nn::MLPParams& p) {
  p.W.back().setZero();
  p.b.back().setZero();
}

Eigen::RowVectorXd row_of(const sim::StateVec& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), 9);
}

// [s0 | s_t | emb | a_t] for one episode of the marker dataset.
Eigen::RowVectorXd q_row(const data::Dataset& d, const Eigen::MatrixXd& embs, int e,
                         std::size_t t) {
  const data::Episode& ep = d.episodes[static_cast<std::size_t>(e)];
  Eigen::RowVectorXd r(52);
  r.segment(0, 9) = row_of(ep.states.front());
  r.segment(9, 9) = row_of(ep.states[t]);
  r.segment(18, lang::kEmbedDim) = embs.row(e);
  r(50) = ep.actions[t][0];
  r(51) = ep.actions[t][1];
  return r;
}

sim::SceneState quiet_scene() {
  sim::SceneState s;
  s.ee = {0.55, 0.15};
  s.drawer_ext = 0.08;
  s.faucet_angle = 0.0;
  s.black_mug = {0.08, 0.5};
  s.white_mug = {0.92, 0.5};
  return s;
}

}  // namespace

TEST_CASE("behavior cloning recovers instruction-conditioned constant actions") {
  data::Dataset d = cloning_dataset();
  base::BCTrainConfig cfg = fast_bc_cfg();
  base::BCTrainResult res = train_lcbc(d, cfg, 7);

  REQUIRE(res.curves.size() == 4);
  CHECK(res.curves.back().step == 800);
  CHECK(res.best_heldout_mse < 5e-5);
  CHECK(res.best_heldout_mse ==
        doctest::Approx(std::min_element(res.curves.begin(), res.curves.end(),
                                         [](const auto& a, const auto& b) {
                                           return a.heldout_mse < b.heldout_mse;
                                         })->heldout_mse)
            .epsilon(1e-15));
  CHECK(res.policy.dataset_hash == "bcdeadbeef");

  sim::StateVec probe = d.episodes[0].states[1];
  sim::Action open_a = base::bc_act(res.policy, probe, d.episodes[0].instruction);
  sim::Action close_a = base::bc_act(res.policy, probe, d.episodes[1].instruction);
  CHECK(std::abs(open_a.delta.x - 0.02) < 0.005);
  CHECK(std::abs(open_a.delta.y + 0.01) < 0.005);
  CHECK(std::abs(close_a.delta.x + 0.02) < 0.005);
  CHECK(std::abs(close_a.delta.y - 0.01) < 0.005);
}

TEST_CASE("behavior cloning training is deterministic in its seed") {
  data::Dataset d = cloning_dataset();
  base::BCTrainConfig cfg = fast_bc_cfg();
  cfg.steps = 200;
  base::BCTrainResult a = train_lcbc(d, cfg, 11);
  base::BCTrainResult b = train_lcbc(d, cfg, 11);
  base::BCTrainResult c = train_lcbc(d, cfg, 12);

  REQUIRE(a.curves.size() == b.curves.size());
  for (std::size_t i = 0; i < a.curves.size(); ++i) {
    CHECK(a.curves[i].train_mse == b.curves[i].train_mse);
    CHECK(a.curves[i].heldout_mse == b.curves[i].heldout_mse);
  }
  bool diverged = false;
  for (std::size_t i = 0; i < a.curves.size(); ++i)
    diverged = diverged || a.curves[i].train_mse != c.curves[i].train_mse;
  CHECK(diverged);

  sim::StateVec probe = d.episodes[2].states[0];
  sim::Action aa = base::bc_act(a.policy, probe, d.episodes[2].instruction);
  sim::Action ba = base::bc_act(b.policy, probe, d.episodes[2].instruction);
  CHECK(aa.delta.x == ba.delta.x);
  CHECK(aa.delta.y == ba.delta.y);
}

TEST_CASE("cloned actions clip to the action bound") {
  base::BCPolicy p;
  Rng r(3);
  p.net = nn::init_params(base::bc_net_spec(), r);
  zero_head(p.net);
  p.net.b.back() << 4.0, -4.0;
  sim::Action a = base::bc_act(p, sim::state_vector(quiet_scene()),
                               Eigen::VectorXd::Zero(lang::kEmbedDim));
  CHECK(a.delta.x == sim::kActionBound);
  CHECK(a.delta.y == -sim::kActionBound);
}

TEST_CASE("cloning rejects bad configs and tiny datasets") {
  base::BCTrainConfig cfg = fast_bc_cfg();
  data::Dataset d = cloning_dataset();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(base::train_lcbc(d, cfg, 1), ConfigError);
  cfg = fast_bc_cfg();
  cfg.eval_every = 0;
  CHECK_THROWS_AS(base::train_lcbc(d, cfg, 1), ConfigError);
  data::Dataset one;
  one.episodes.push_back(d.episodes[0]);
  CHECK_THROWS_AS(base::train_lcbc(one, fast_bc_cfg(), 1), DataError);
}

TEST_CASE("cloning checkpoints round-trip through disk") {
  data::Dataset d = cloning_dataset();
  base::BCTrainConfig cfg = fast_bc_cfg();
  cfg.steps = 100;
  cfg.eval_every = 50;
  base::BCTrainResult res = train_lcbc(d, cfg, 5);

  std::string path = "/tmp/lorel_test_bc.ckpt";
  base::save_bc(res.policy, path);
  base::BCPolicy back = base::load_bc(path);
  CHECK(back.encoder_mode == res.policy.encoder_mode);
  CHECK(back.lang_seed == res.policy.lang_seed);
  CHECK(back.dataset_hash == res.policy.dataset_hash);
  sim::StateVec probe = d.episodes[0].states[2];
  sim::Action a = base::bc_act(res.policy, probe, d.episodes[0].instruction);
  sim::Action b = base::bc_act(back, probe, d.episodes[0].instruction);
  CHECK(a.delta.x == b.delta.x);
  CHECK(a.delta.y == b.delta.y);

  std::remove((path + ".json").c_str());
  CHECK_THROWS_AS(base::load_bc(path), CheckpointError);
  std::ofstream(path + ".json") << "{\"encoder_mode\": 3}";
  CHECK_THROWS_AS(base::load_bc(path), CheckpointError);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("q batches halve into terminal and bootstrapped rows") {
  data::Dataset d = marker_dataset();
  Eigen::MatrixXd embs = marker_embeddings();
  base::QTrainConfig cfg;
  cfg.batch_size = 8;
  cfg.action_samples = 3;
  Rng init_rng(21);
  nn::MLPParams target = nn::init_params(base::q_net_spec(), init_rng);

  SUBCASE("gamma zero makes targets exactly one and zero") {
    cfg.gamma = 0.0;
    Rng rng(42);
    base::QBatch b = base::build_q_batch(d, embs, cfg, target, rng);
    REQUIRE(b.x.rows() == 8);
    REQUIRE(b.x.cols() == 52);
    REQUIRE(b.targets.size() == 8);
    for (int k = 0; k < 4; ++k) CHECK(b.targets(k) == 1.0);
    for (int k = 4; k < 8; ++k) CHECK(b.targets(k) == 0.0);

    for (int k = 0; k < 4; ++k) {
      // Terminal rows pair the last pre-terminal state with the last action.
      bool is_ep0 = (b.x.row(k) - q_row(d, embs, 0, 2)).norm() == 0.0;
      bool is_ep1 = (b.x.row(k) - q_row(d, embs, 1, 2)).norm() == 0.0;
      CHECK((is_ep0 || is_ep1));
    }
    for (int k = 4; k < 8; ++k) {
      bool matched = false;
      for (int e = 0; e < 2; ++e)
        for (std::size_t t = 0; t <= 1; ++t)
          matched = matched || (b.x.row(k) - q_row(d, embs, e, t)).norm() == 0.0;
      CHECK(matched);
    }
  }

  SUBCASE("a constant target net pins bootstrapped targets at gamma times its value") {
    cfg.gamma = 0.9;
    zero_head(target);  // sigmoid head now answers 0.5 everywhere
    Rng rng(43);
    base::QBatch b = base::build_q_batch(d, embs, cfg, target, rng);
    for (int k = 0; k < 4; ++k) CHECK(b.targets(k) == 1.0);
    for (int k = 4; k < 8; ++k) CHECK(b.targets(k) == doctest::Approx(0.45).epsilon(1e-15));
  }

  SUBCASE("batch construction is deterministic in the rng state") {
    Rng r1(7), r2(7);
    base::QBatch b1 = base::build_q_batch(d, embs, cfg, target, r1);
    base::QBatch b2 = base::build_q_batch(d, embs, cfg, target, r2);
    CHECK((b1.x - b2.x).norm() == 0.0);
    CHECK((b1.targets - b2.targets).norm() == 0.0);
  }

  SUBCASE("invalid shapes and datasets are rejected") {
    Rng rng(1);
    cfg.batch_size = 7;
    CHECK_THROWS_AS(base::build_q_batch(d, embs, cfg, target, rng), ConfigError);
    cfg.batch_size = 8;
    data::Dataset shorties = d;
    for (auto& ep : shorties.episodes) {
      ep.states.resize(2);
      ep.actions.resize(1);
    }
    CHECK_THROWS_AS(base::build_q_batch(shorties, embs, cfg, target, rng), DataError);
    data::Dataset empty;
    CHECK_THROWS_AS(base::build_q_batch(empty, marker_embeddings(), cfg, target, rng), DataError);
  }
}

TEST_CASE("q training stops on plateau or at the step cap") {
  data::Dataset d = marker_dataset();
  base::QTrainConfig cfg;
  cfg.max_steps = 600;
  cfg.window = 100;
  cfg.min_steps = 200;
  cfg.target_refresh = 100;
  cfg.action_samples = 5;
  cfg.dataset_hash = "qfeed";

  SUBCASE("an always-satisfied plateau rule stops at the first eligible window") {
    cfg.plateau_rel_change = 1e9;
    base::QTrainResult res = base::train_lcrl(d, cfg, 3);
    CHECK(res.plateaued);
    CHECK(res.steps_run == 200);
    REQUIRE(res.curves.size() == 2);
    CHECK(res.curves[0].step == 100);
    CHECK(res.curves[1].step == 200);
    CHECK(res.model.dataset_hash == "qfeed");
  }

  SUBCASE("a never-satisfied plateau rule runs to the cap") {
    cfg.plateau_rel_change = 0.0;
    base::QTrainResult res = base::train_lcrl(d, cfg, 3);
    CHECK_FALSE(res.plateaued);
    CHECK(res.steps_run == 600);
    CHECK(res.curves.size() == 6);
    bool improved = res.curves.back().bellman_mse < res.curves.front().bellman_mse;
    CHECK(improved);
  }

  SUBCASE("training is deterministic in its seed") {
    cfg.max_steps = 200;
    cfg.min_steps = 10000;
    base::QTrainResult a = base::train_lcrl(d, cfg, 9);
    base::QTrainResult b = base::train_lcrl(d, cfg, 9);
    base::QTrainResult c = base::train_lcrl(d, cfg, 10);
    REQUIRE(a.curves.size() == b.curves.size());
    for (std::size_t i = 0; i < a.curves.size(); ++i)
      CHECK(a.curves[i].bellman_mse == b.curves[i].bellman_mse);
    CHECK(a.curves[0].bellman_mse != c.curves[0].bellman_mse);
  }

  SUBCASE("discounts outside [0, 1) are rejected") {
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(base::train_lcrl(d, cfg, 1), ConfigError);
    cfg.gamma = -0.1;
    CHECK_THROWS_AS(base::train_lcrl(d, cfg, 1), ConfigError);
  }
}

TEST_CASE("greedy action selection scans sampled candidates") {
  sim::SceneState s = quiet_scene();
  sim::StateVec sv = sim::state_vector(s);
  base::QModel q;
  Rng init_rng(31);
  q.net = nn::init_params(base::q_net_spec(), init_rng);

  SUBCASE("a single candidate is returned verbatim") {
    q.action_samples = 1;
    Rng a(55), b(55);
    sim::Action act = base::lcrl_act(q, sv, sv, Eigen::VectorXd::Zero(lang::kEmbedDim), a);
    double x = b.uniform(-sim::kActionBound, sim::kActionBound);
    double y = b.uniform(-sim::kActionBound, sim::kActionBound);
    CHECK(act.delta.x == x);
    CHECK(act.delta.y == y);
  }

  SUBCASE("a constant q function picks the first candidate") {
    q.action_samples = 9;
    zero_head(q.net);
    Rng a(56), b(56);
    sim::Action act = base::lcrl_act(q, sv, sv, Eigen::VectorXd::Zero(lang::kEmbedDim), a);
    double x = b.uniform(-sim::kActionBound, sim::kActionBound);
    double y = b.uniform(-sim::kActionBound, sim::kActionBound);
    CHECK(act.delta.x == x);
    CHECK(act.delta.y == y);
  }

  SUBCASE("selection is deterministic and bounded") {
    q.action_samples = 20;
    Rng a(57), b(57);
    Eigen::VectorXd emb = Eigen::VectorXd::Constant(lang::kEmbedDim, 0.2);
    sim::Action a1 = base::lcrl_act(q, sv, sv, emb, a);
    sim::Action a2 = base::lcrl_act(q, sv, sv, emb, b);
    CHECK(a1.delta.x == a2.delta.x);
    CHECK(a1.delta.y == a2.delta.y);
    CHECK(std::abs(a1.delta.x) <= sim::kActionBound);
    CHECK(std::abs(a1.delta.y) <= sim::kActionBound);
  }

  SUBCASE("the string overload encodes with the model's own settings") {
    q.action_samples = 6;
    lang::Encoder enc(q.encoder_mode, lang::Lexicon::builtin(), q.lang_seed);
    Rng a(58), b(58);
    sim::Action via_string = base::lcrl_act(q, sv, sv, std::string("open the drawer"), a);
    sim::Action via_emb = base::lcrl_act(q, sv, sv, enc.encode("open the drawer"), b);
    CHECK(via_string.delta.x == via_emb.delta.x);
    CHECK(via_string.delta.y == via_emb.delta.y);
  }
}

TEST_CASE("q checkpoints round-trip through disk") {
  base::QModel q;
  Rng r(77);
  q.net = nn::init_params(base::q_net_spec(), r);
  q.gamma = 0.8;
  q.action_samples = 33;
  q.dataset_hash = "cafef00d";

  std::string path = "/tmp/lorel_test_q.ckpt";
  base::save_q(q, path);
  base::QModel back = base::load_q(path);
  CHECK(back.gamma == 0.8);
  CHECK(back.action_samples == 33);
  CHECK(back.encoder_mode == q.encoder_mode);
  CHECK(back.lang_seed == q.lang_seed);
  CHECK(back.dataset_hash == "cafef00d");
  sim::StateVec sv = sim::state_vector(quiet_scene());
  Rng a(5), b(5);
  sim::Action a1 = base::lcrl_act(q, sv, sv, Eigen::VectorXd::Zero(lang::kEmbedDim), a);
  sim::Action a2 = base::lcrl_act(back, sv, sv, Eigen::VectorXd::Zero(lang::kEmbedDim), b);
  CHECK(a1.delta.x == a2.delta.x);
  CHECK(a1.delta.y == a2.delta.y);

  std::remove((path + ".json").c_str());
  CHECK_THROWS_AS(base::load_q(path), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("goal state cost peaks exactly at the goal") {
  sim::SceneState goal = quiet_scene();
  plan::RewardFn fn = base::goal_state_cost(goal);
  sim::StateVec gv = sim::state_vector(goal);

  Eigen::MatrixXd finals(3, 9);
  finals.row(0) = row_of(gv);
  finals.row(1) = row_of(gv);
  finals(1, 0) += 0.1;
  finals.row(2) = row_of(gv);
  finals(2, 3) += 0.2;
  finals(2, 7) -= 0.1;

  Eigen::VectorXd r = fn(gv, finals);
  CHECK(r(0) == 0.0);
  CHECK(r(1) == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(r(2) == doctest::Approx(-(0.04 + 0.01)).epsilon(1e-12));
  CHECK(r(1) < r(0));
  CHECK(r(2) < r(1));
}

TEST_CASE("constructed goal states satisfy their tasks when headroom allows") {
  sim::SceneState s = quiet_scene();

  for (sim::TaskId id : sim::kAllTasks) {
    sim::TaskSpec spec = sim::task_spec(id);
    sim::SceneState goal = base::make_goal_state(spec, s);
    CHECK(sim::success(spec, s, goal));

    // Only the task coordinate moves.
    sim::StateVec sv = sim::state_vector(s);
    sim::StateVec gv = sim::state_vector(goal);
    int moved = 0;
    for (std::size_t k = 0; k < 9; ++k) moved += gv[k] != sv[k];
    CHECK(moved == 1);
  }
}

TEST_CASE("goal construction clips at articulation limits") {
  sim::SceneState s = quiet_scene();
  s.drawer_ext = 0.13;
  sim::TaskSpec open = sim::task_spec(sim::TaskId::kOpenDrawer);
  sim::SceneState goal = base::make_goal_state(open, s);
  CHECK(goal.drawer_ext == sim::kDrawerExtMax);
  CHECK(sim::success(open, s, goal));  // 0.03 of headroom clears the threshold

  s = quiet_scene();
  s.faucet_angle = sim::kFaucetAngleMax - 0.1;
  sim::TaskSpec left = sim::task_spec(sim::TaskId::kFaucetLeft);
  goal = base::make_goal_state(left, s);
  CHECK(goal.faucet_angle == sim::kFaucetAngleMax);
  // 0.1 rad of headroom is below the success threshold: the goal state
  // under-specifies the task here, by construction.
  CHECK_FALSE(sim::success(left, s, goal));
}

TEST_CASE("oracle progress rewards are signed per task") {
  sim::StateVec s0 = sim::state_vector(quiet_scene());
  struct Axis {
    sim::TaskId id;
    int col;
    double sign;
  };
  const Axis axes[] = {
      {sim::TaskId::kCloseDrawer, 2, -1.0},   {sim::TaskId::kOpenDrawer, 2, +1.0},
      {sim::TaskId::kFaucetLeft, 3, +1.0},    {sim::TaskId::kFaucetRight, 3, -1.0},
      {sim::TaskId::kBlackMugRight, 4, +1.0}, {sim::TaskId::kWhiteMugDown, 7, -1.0},
  };
  for (const Axis& ax : axes) {
    plan::RewardFn fn = base::oracle_reward(sim::task_spec(ax.id));
    Eigen::MatrixXd finals(3, 9);
    finals.row(0) = row_of(s0);
    finals.row(1) = row_of(s0);
    finals(1, ax.col) += 0.03;
    finals.row(2) = row_of(s0);
    finals(2, (ax.col + 1) % 9) += 0.05;  // unrelated coordinate
    Eigen::VectorXd r = fn(s0, finals);
    CHECK(r(0) == 0.0);
    CHECK(r(1) == doctest::Approx(ax.sign * 0.03).epsilon(1e-15));
    CHECK(r(2) == 0.0);
  }
}

TEST_CASE("shaped rewards add a pull toward the engagement point") {
  sim::StateVec s0 = sim::state_vector(quiet_scene());

  SUBCASE("drawer tasks aim at the handle") {
    sim::TaskSpec open = sim::task_spec(sim::TaskId::kOpenDrawer);
    plan::RewardFn shaped = base::shaped_oracle_reward(open);
    plan::RewardFn plain = base::oracle_reward(open);

    Eigen::MatrixXd finals(2, 9);
    finals.row(0) = row_of(s0);
    finals(0, 0) = sim::kDrawerAnchor.x;
    finals(0, 1) = sim::kDrawerAnchor.y + sim::kDrawerAxisSign * finals(0, 2);
    finals.row(1) = row_of(s0);
    finals(1, 0) = 0.95;
    finals(1, 1) = 0.05;

    Eigen::VectorXd rs = shaped(s0, finals);
    Eigen::VectorXd rp = plain(s0, finals);
    CHECK(rs(0) == doctest::Approx(rp(0)).epsilon(1e-15));  // at the handle: no penalty
    CHECK(rs(1) < rs(0));
    double d = std::hypot(0.95 - sim::kDrawerAnchor.x,
                          0.05 - (sim::kDrawerAnchor.y + sim::kDrawerAxisSign * s0[2]));
    CHECK(rs(1) == doctest::Approx(rp(1) - 0.05 * d).epsilon(1e-12));

    CHECK(base::shaped_oracle_reward(open, 0.0)(s0, finals)(1) ==
          doctest::Approx(rp(1)).epsilon(1e-15));
  }

  SUBCASE("faucet tasks aim at the lever tip") {
    sim::TaskSpec left = sim::task_spec(sim::TaskId::kFaucetLeft);
    plan::RewardFn shaped = base::shaped_oracle_reward(left);
    Eigen::MatrixXd finals(1, 9);
    finals.row(0) = row_of(s0);
    finals(0, 3) = 0.3;
    finals(0, 0) = sim::kFaucetBase.x - sim::kFaucetLever * std::sin(0.3);
    finals(0, 1) = sim::kFaucetBase.y + sim::kFaucetLever * std::cos(0.3);
    CHECK(shaped(s0, finals)(0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("mug tasks aim at the push side") {
    sim::TaskSpec black = sim::task_spec(sim::TaskId::kBlackMugRight);
    Eigen::MatrixXd finals(1, 9);
    finals.row(0) = row_of(s0);
    finals(0, 0) = s0[4] - sim::kMugRadius;
    finals(0, 1) = s0[5];
    CHECK(base::shaped_oracle_reward(black)(s0, finals)(0) == 0.0);

    sim::TaskSpec white = sim::task_spec(sim::TaskId::kWhiteMugDown);
    finals.row(0) = row_of(s0);
    finals(0, 0) = s0[6];
    finals(0, 1) = s0[7] + sim::kMugRadius;
    CHECK(base::shaped_oracle_reward(white)(s0, finals)(0) == 0.0);
  }
}

TEST_CASE("the random baseline draws from the simulator's action distribution") {
  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) {
    sim::Action pa = base::random_policy(a);
    sim::Action pb = sim::random_action(b);
    CHECK(pa.delta.x == pb.delta.x);
    CHECK(pa.delta.y == pb.delta.y);
  }
}

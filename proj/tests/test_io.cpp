#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "csalign/config.hpp"
#include "csalign/io.hpp"

namespace io = csalign::io;
using csalign::ErrorCode;
using csalign::Matrix;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const csalign::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no csalign::Error thrown";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(EmbeddingCsv, HeaderLabelsAndRoundTrip) {
  const auto b = io::parse_embedding_csv("x,y,label\n1.5,2,3\n-1,0.25,0\n", true, "img");
  ASSERT_EQ(b.rows(), 2);
  ASSERT_EQ(b.dim(), 2);
  EXPECT_EQ(b.labels(), (csalign::Labels{3, 0}));
  EXPECT_DOUBLE_EQ(b.data()(0, 0), 1.5);
  const auto again = io::parse_embedding_csv(io::to_embedding_csv(b, true), true);
  EXPECT_EQ(again.data(), b.data());
  EXPECT_EQ(again.labels(), b.labels());

  const auto unlabeled = io::parse_embedding_csv("0.1,0.2\n0.3,0.4\n0.5,0.6\n", false);
  EXPECT_EQ(unlabeled.labels(), (csalign::Labels{0, 1, 2}));
}

TEST(EmbeddingCsv, Errors) {
  EXPECT_EQ(code_of([] { (void)io::parse_embedding_csv("1,2\n3\n", false); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_embedding_csv("1,abc\n", false); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_embedding_csv("", false); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_embedding_csv("1,2.5\n", true); }), ErrorCode::Parse);
}

TEST(Emb1, RoundTripIsBitExact) {
  Matrix m(3, 2);
  m << 0.1, -2.5e-300, 1e300, 3.0, -0.0, 7.25;
  const std::string bytes = io::to_emb1(m);
  ASSERT_EQ(bytes.size(), 16u + 6u * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "EMB1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
  const auto b = io::parse_emb1(bytes);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(b.data().data()[k]), std::bit_cast<std::uint64_t>(m.data()[k]));
  }
  EXPECT_EQ(code_of([&] { (void)io::parse_emb1(bytes.substr(0, bytes.size() - 1)); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_emb1("EMBX"); }), ErrorCode::Parse);
}

TEST(PmfFile, SingleLine) {
  const auto p = io::parse_pmf_line("# comment\n0.25, 0.75\n");
  ASSERT_EQ(p.size(), 2);
  EXPECT_DOUBLE_EQ(p(1), 0.75);
  EXPECT_EQ(code_of([] { (void)io::parse_pmf_line("0.5,0.5\n0.5,0.5\n"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_pmf_line("\n"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::load_pmf("/nonexistent/file.csv"); }), ErrorCode::Parse);
}

TEST(Json, SeventeenDigitsAndNonFinite) {
  io::ordered_json j;
  j["a"] = 0.1;
  j["inf"] = std::numeric_limits<double>::infinity();
  j["nan"] = std::nan("");
  j["n"] = 3;
  const std::string s = io::dump_json(j);
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(s.find("\"Infinity\""), std::string::npos);
  EXPECT_NE(s.find("\"NaN\""), std::string::npos);
  const auto parsed = io::ordered_json::parse(s);
  EXPECT_EQ(parsed["a"].get<double>(), 0.1);
  EXPECT_EQ(parsed["n"].get<int>(), 3);
}

TEST(Config, ParseAndApply) {
  const auto kv = io::parse_config("# comment\nlearning_rate = 0.01  # trailing\nstrategy=ccw\ninput_dims=3,4\nseed=9\n");
  csalign::ExperimentConfig cfg;
  csalign::apply_config(kv, cfg);
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.01);
  EXPECT_EQ(cfg.train.strategy, csalign::Strategy::Counterclockwise);
  EXPECT_EQ(cfg.synth.input_dims, (std::vector<int>{3, 4}));
  EXPECT_EQ(cfg.synth.seed, 9u);
  EXPECT_EQ(cfg.train.seed, 9u);
}

TEST(Config, Errors) {
  csalign::ExperimentConfig cfg;
  EXPECT_EQ(code_of([&] { csalign::apply_config({{"learning_rat", "1"}}, cfg); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([&] { csalign::apply_config({{"max_epochs", "many"}}, cfg); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([&] { csalign::apply_config({{"loss_kind", "hinge"}}, cfg); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { (void)io::parse_config("no equals sign\n"); }), ErrorCode::Parse);
}

TEST(Config, TextRoundTrip) {
  csalign::ExperimentConfig cfg;
  cfg.train.learning_rate = 3e-4;
  cfg.train.mmd = csalign::MmdConfig::fixed(0.7);
  cfg.synth.modality_names = {"img", "txt", "aud"};
  cfg.train.loss_kind = csalign::LossKind::PairwiseCS;
  csalign::ExperimentConfig back;
  csalign::apply_config(io::parse_config(csalign::to_config_text(cfg)), back);
  EXPECT_EQ(csalign::to_json(back), csalign::to_json(cfg));
  EXPECT_EQ(csalign::to_config_text(back), csalign::to_config_text(cfg));
}

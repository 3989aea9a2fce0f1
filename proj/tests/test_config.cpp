#include <fstream>

#include "support.hpp"

namespace vlc {
namespace {

std::string error_field(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  auto c = parse_config_string(R"(
# desk run
model.layers = 2      # shallow
optim.lr=3e-4
loss.normalize_pixels = yes
data.source = synthetic
train.seed = 18446744073709551615
)");
  EXPECT_EQ(c.layers, 2u);
  EXPECT_DOUBLE_EQ(c.lr, 3e-4);
  EXPECT_TRUE(c.normalize_pixels);
  EXPECT_EQ(c.seed, std::numeric_limits<std::size_t>::max());
  EXPECT_EQ(c.width, RunConfig{}.width);
}

TEST(Config, ErrorsCarryTheFieldPath) {
  EXPECT_EQ(error_field("model.heads = 5\n"), "model.heads");
  EXPECT_EQ(error_field("model.layers = -1\n"), "model.layers");
  EXPECT_EQ(error_field("optim.lr = fast\n"), "optim.lr");
  EXPECT_EQ(error_field("loss.mim = maybe\n"), "loss.mim");
  EXPECT_EQ(error_field("model.depth = 3\n"), "model.depth");
  EXPECT_EQ(error_field("mask.image_ratio = 1.0\n"), "mask.image_ratio");
  EXPECT_EQ(error_field("mask.text_prob = 0\n"), "mask.text_prob");
  EXPECT_EQ(error_field("data.source = jsonl\n"), "data.manifest");
  EXPECT_EQ(error_field("model.patch = 7\n"), "model.patch");
  EXPECT_EQ(error_field("loss.mlm = false\nloss.mim = false\nloss.itm = false\n"), "loss");
}

TEST(Config, ErrorMessagesNameTheLine) {
  try {
    parse_config_string("model.layers = 2\n\noptim.beta1 = 1.5\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "optim.beta1");
  }
  try {
    parse_config_string("model.layers = 2\nmodel.width 64\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  try {
    parse_config_string("\n\noptim.lr = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, DisablingMimAllowsZeroImageMasking) {
  auto c = parse_config_string("loss.mim = false\nmask.image_ratio = 0\n");
  EXPECT_FALSE(c.loss_mim);
}

TEST(Config, FormatParsesBackToTheSameConfig) {
  RunConfig c;
  c.lr = 1.0 / 3.0;
  c.manifest = "data/train.jsonl";
  c.bert_mix = true;
  c.seed = 123456789012345ull;
  auto back = parse_config_string(format_config(c), RunConfig{});
  EXPECT_EQ(config_entries(back), config_entries(c));
  EXPECT_EQ(back.lr, c.lr);
}

TEST(Config, BaseValuesSurviveAndFilesLoad) {
  RunConfig base;
  base.steps = 17;
  test::TempDir dir("cfg");
  std::ofstream(dir / "run.cfg") << "train.batch_size = 4\n";
  auto c = load_config((dir / "run.cfg").string(), base);
  EXPECT_EQ(c.steps, 17u);
  EXPECT_EQ(c.batch_size, 4u);
  EXPECT_THROW(load_config((dir / "missing.cfg").string()), ConfigError);
}

TEST(Config, GetAndSetByKey) {
  RunConfig c;
  set_field(c, "probe.word", "red");
  EXPECT_EQ(get_field(c, "probe.word"), "red");
  EXPECT_EQ(get_field(c, "model.width"), "64");
  EXPECT_EQ(get_field(c, "loss.itm"), "true");
  EXPECT_THROW(get_field(c, "nope"), ConfigError);
}

TEST(Config, DerivedObjectsFollowTheFields) {
  RunConfig c;
  c.image_mask_ratio = 0.5;
  c.weight_decay = 0.2;
  c.steps = 40;
  auto m = c.model(20);
  EXPECT_EQ(m.encoder.n_max, 16u);
  EXPECT_EQ(m.vocab_size, 20u);
  EXPECT_DOUBLE_EQ(c.pretrain_options().masking.image_ratio, 0.5);
  EXPECT_DOUBLE_EQ(c.adamw().weight_decay, 0.2);
  EXPECT_EQ(c.schedule().total_steps, 40u);
}

}  // namespace
}  // namespace vlc

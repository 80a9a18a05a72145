#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "tsr/annotation.hpp"
#include "tsr/config.hpp"
#include "tsr/overlay.hpp"

using namespace tsr;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tsr_io_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("growth schedule") {
  CHECK(growth_schedule(5) == std::vector<int>{1, 3, 7, 11, 15});
  CHECK(growth_schedule(4) == std::vector<int>{1, 3, 7, 11});
  CHECK(growth_consistent(15, 5));
  CHECK(growth_consistent(11, 4));
  CHECK_FALSE(growth_consistent(15, 4));
  CHECK_FALSE(growth_consistent(13, 5));
}

TEST_CASE("presets and config files") {
  RunConfig paper = preset_config("paper");
  CHECK(paper.model.d_model == 256);
  CHECK(paper.model.heads == 16);
  CHECK(paper.model.ffn_dim == 1024);
  CHECK(paper.model.p2_channels == 64);
  CHECK(paper.model.highres_channels == 256);
  CHECK(paper.train.lr == 1e-4);
  CHECK(paper.train.weight_decay == 5e-4);
  CHECK(paper.loss.ref_weight == 0.2);
  CHECK(paper.train.infer_long_side == 1024);
  CHECK_NOTHROW(paper.validate());
  RunConfig light = preset_config("light");
  CHECK(light.model.points_per_line == 11);
  CHECK(light.model.layers == 4);
  CHECK_NOTHROW(light.validate());
  CHECK_THROWS_AS(preset_config("huge"), ConfigError);

  RunConfig c = parse_config("# comment\npreset = light\nmodel.d_model = 96 # trailing\ntrain.train_scales = 96,128\nloss.matching = original_detr\n");
  CHECK(c.preset == "light");
  CHECK(c.model.d_model == 96);
  CHECK(c.train.train_scales == std::vector<int>{96, 128});
  CHECK(c.loss.matching == MatchingMode::original_detr);

  RunConfig again = parse_config(serialize_config(c));
  CHECK(serialize_config(again) == serialize_config(c));

  try {
    parse_config("model.points_per_line = 15\nmodel.layers = 4\n");
    FAIL("expected a growth error");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("K=15") != std::string::npos);
    CHECK(msg.find("L=4") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("no_equals_here\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.unknown = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.lr = abc\n"), ConfigError);

  setenv("TSRLAB_SEED", "1234", 1);
  RunConfig env = preset_config("desk");
  apply_environment(env);
  CHECK(env.train.seed == 1234u);
  unsetenv("TSRLAB_SEED");
}

TEST_CASE("annotation JSON round trip") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    AnnotatedSample s = generate_sample(seed, static_cast<Difficulty>(seed % 4), static_cast<WarpLevel>(seed % 3));
    std::string a = serialize_annotation(s);
    AnnotatedSample back = parse_annotation(a);
    CHECK(serialize_annotation(back) == a);
    REQUIRE(back.gt_grid.final_cells.size() == s.gt_grid.final_cells.size());
    for (std::size_t i = 0; i < s.gt_grid.final_cells.size(); ++i) {
      CHECK(back.gt_grid.final_cells[i].box.corners == s.gt_grid.final_cells[i].box.corners);
      CHECK(back.gt_grid.final_cells[i].row_span == s.gt_grid.final_cells[i].row_span);
    }
    CHECK(back.cell_empty == s.cell_empty);
  }
}

TEST_CASE("dataset files and overlay") {
  auto dir = scratch_dir("dataset");
  AnnotatedSample s = generate_sample(4, Difficulty::spans, WarpLevel::mild);
  save_sample(s, dir, "sample_00000");
  auto files = list_dataset(dir);
  REQUIRE(files.size() == 1);
  AnnotatedSample back = load_sample(files[0]);
  CHECK(back.image == s.image);
  CHECK(serialize_annotation(back) == serialize_annotation(s));

  write_overlay(s.image, s.gt_row_seps, s.gt_col_seps, s.gt_grid, dir / "overlay.png");
  CHECK(std::filesystem::file_size(dir / "overlay.png") > 0);
  std::filesystem::remove_all(dir);
}

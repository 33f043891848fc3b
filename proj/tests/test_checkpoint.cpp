#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "xmusic/checkpoint.hpp"
#include "xmusic/error.hpp"
#include "xmusic/synthetic.hpp"

using namespace xmusic;

namespace {

GeneratorConfig small_generator() {
  GeneratorConfig c;
  c.hidden = 16;
  c.heads = 2;
  c.layers = 1;
  c.embed_width_factor = 1.0 / 64;
  c.context = 64;
  c.seed = 21;
  return c;
}

SelectorConfig small_selector() {
  SelectorConfig c;
  c.hidden = 16;
  c.heads = 2;
  c.layers = 1;
  c.embed_width_factor = 1.0 / 64;
  c.seed = 22;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("xmusic_ckpt_" + name)).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void dump(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IOError;
}

}  // namespace

TEST_CASE("generator and selector round trip through one file") {
  Generator gen(small_generator());
  Selector sel(small_selector());
  const auto path = temp_path("both.xmck");
  checkpoint::save(path, {checkpoint::entry_of(gen), checkpoint::entry_of(sel)});
  const auto models = checkpoint::load(path);
  REQUIRE(models.size() == 2);
  CHECK(checkpoint::has_role(models, "generator"));
  CHECK(checkpoint::has_role(models, "selector"));

  const Generator gen2 = checkpoint::generator_from(models);
  const Selector sel2 = checkpoint::selector_from(models);
  CHECK(gen2.config().to_json() == gen.config().to_json());
  CHECK(sel2.config().to_json() == sel.config().to_json());
  for (const auto* p : gen.params().all()) CHECK(gen2.params().at(p->name).value == p->value);
  for (const auto* p : sel.params().all()) CHECK(sel2.params().at(p->name).value == p->value);
  CHECK(gen2.params().scalar_count() == gen.params().scalar_count());

  // identical params give identical behaviour
  ProjectionElements ctl;
  ctl.emotion = EmotionElement{Emotion::Happy, {}};
  const auto a = gen.sample(ctl, {1.0, 2, 5});
  const auto b = gen2.sample(ctl, {1.0, 2, 5});
  CHECK(a.events == b.events);
  const auto seq = synthetic::quality_corpus(1, 3).front().sequence;
  CHECK(sel.score(seq).quality == sel2.score(seq).quality);
  std::filesystem::remove(path);
}

TEST_CASE("a selector-only file has no generator") {
  Selector sel(small_selector());
  const auto path = temp_path("sel.xmck");
  checkpoint::save(path, {checkpoint::entry_of(sel)});
  const auto models = checkpoint::load(path);
  CHECK(!checkpoint::has_role(models, "generator"));
  CHECK(code_of([&] { checkpoint::generator_from(models); }) == ErrorCode::InvalidCheckpoint);
  std::filesystem::remove(path);
}

TEST_CASE("malformed files are rejected") {
  Selector sel(small_selector());
  const auto path = temp_path("good.xmck");
  checkpoint::save(path, {checkpoint::entry_of(sel)});
  const auto good = slurp(path);
  const auto bad = temp_path("bad.xmck");

  CHECK(code_of([&] { checkpoint::load(temp_path("does_not_exist.xmck")); }) == ErrorCode::IOError);

  auto magic = good;
  magic[0] = 'Z';
  dump(bad, magic);
  CHECK(code_of([&] { checkpoint::load(bad); }) == ErrorCode::InvalidCheckpoint);

  auto version = good;
  version[4] = 9;
  dump(bad, version);
  CHECK(code_of([&] { checkpoint::load(bad); }) == ErrorCode::InvalidCheckpoint);

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, std::size_t{40}, good.size() - 8}) {
    CAPTURE(cut);
    dump(bad, std::vector<char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)));
    CHECK(code_of([&] { checkpoint::load(bad); }) == ErrorCode::InvalidCheckpoint);
  }

  auto header = good;
  header[12] = '[';
  dump(bad, header);
  CHECK(code_of([&] { checkpoint::load(bad); }) == ErrorCode::InvalidCheckpoint);

  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}

TEST_CASE("missing or misshapen tensors are rejected") {
  Selector sel(small_selector());
  auto entry = checkpoint::entry_of(sel);
  auto dropped = entry;
  dropped.tensors.pop_back();
  CHECK(code_of([&] { checkpoint::selector_from({dropped}); }) == ErrorCode::InvalidCheckpoint);
  auto reshaped = entry;
  reshaped.tensors.back().value = nn::Matrix(1, 1);
  CHECK(code_of([&] { checkpoint::selector_from({reshaped}); }) == ErrorCode::InvalidCheckpoint);
  auto vocab = entry;
  vocab.config["embed_width_factor"] = 0.5;
  CHECK(code_of([&] { checkpoint::selector_from({vocab}); }) == ErrorCode::InvalidCheckpoint);
}

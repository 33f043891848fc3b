#include "xmusic/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "xmusic/error.hpp"

namespace xmusic::checkpoint {

namespace {

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw Error(ErrorCode::InvalidCheckpoint, "truncated header");
  return to_le(v);
}

ModelEntry entry_from_store(const std::string& role, nlohmann::json config, const VocabSpec& vocab,
                            const nn::ParamStore& store) {
  ModelEntry e{role, std::move(config), vocab, {}};
  for (const nn::Parameter* p : store.all()) e.tensors.push_back({p->name, p->value});
  return e;
}

const ModelEntry& find_role(const std::vector<ModelEntry>& models, const std::string& role) {
  for (const auto& m : models)
    if (m.role == role) return m;
  throw Error(ErrorCode::InvalidCheckpoint, "checkpoint holds no " + role);
}

nn::ParamStore store_of(const ModelEntry& e) {
  nn::ParamStore s;
  for (const auto& t : e.tensors) s.adopt(t.name, t.value);
  return s;
}

}  // namespace

ModelEntry entry_of(const Generator& gen) {
  return entry_from_store("generator", gen.config().to_json(), gen.vocab(), gen.params());
}

ModelEntry entry_of(const Selector& sel) {
  return entry_from_store("selector", sel.config().to_json(), sel.vocab(), sel.params());
}

void save(const std::string& path, const std::vector<ModelEntry>& models) {
  nlohmann::json header;
  header["format"] = "xmusic.checkpoint";
  header["version"] = kVersion;
  header["models"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& m : models) {
    nlohmann::json jm = {{"role", m.role}, {"config", m.config}, {"vocab", vocab_to_json(m.vocab)}};
    jm["tensors"] = nlohmann::json::array();
    for (const auto& t : m.tensors) {
      jm["tensors"].push_back({{"name", t.name}, {"shape", {t.value.rows, t.value.cols}}, {"offset", offset}});
      offset += t.value.size() * sizeof(double);
    }
    header["models"].push_back(std::move(jm));
  }
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& m : models)
    for (const auto& t : m.tensors)
      for (double v : t.value.data) {
        v = to_le(v);
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  if (!os) throw Error(ErrorCode::IOError, "failed writing " + path);
}

std::vector<ModelEntry> load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IOError, "cannot read " + path);
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::InvalidCheckpoint, path + " is not a checkpoint");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw Error(ErrorCode::InvalidCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t len = get_u32(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw Error(ErrorCode::InvalidCheckpoint, "truncated header");
  const std::streamoff data_start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto data_bytes = static_cast<std::uint64_t>(is.tellg() - data_start);

  std::vector<ModelEntry> out;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("version").get<std::uint32_t>() != version)
      throw Error(ErrorCode::InvalidCheckpoint, "header version disagrees with the preamble");
    for (const auto& jm : header.at("models")) {
      ModelEntry m{jm.at("role").get<std::string>(), jm.at("config"), vocab_from_json(jm.at("vocab")), {}};
      for (const auto& jt : jm.at("tensors")) {
        const int r = jt.at("shape").at(0).get<int>(), c = jt.at("shape").at(1).get<int>();
        const auto off = jt.at("offset").get<std::uint64_t>();
        if (r < 0 || c < 0 || off + static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(c) * sizeof(double) > data_bytes)
          throw Error(ErrorCode::InvalidCheckpoint, "tensor '" + jt.at("name").get<std::string>() + "' lies outside the file");
        Tensor t{jt.at("name").get<std::string>(), nn::Matrix(r, c)};
        is.clear();
        is.seekg(data_start + static_cast<std::streamoff>(off));
        is.read(reinterpret_cast<char*>(t.value.data.data()), static_cast<std::streamsize>(t.value.size() * sizeof(double)));
        for (double& v : t.value.data) v = to_le(v);
        m.tensors.push_back(std::move(t));
      }
      out.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidCheckpoint, std::string("bad checkpoint header: ") + e.what());
  }
  return out;
}

bool has_role(const std::vector<ModelEntry>& models, const std::string& role) {
  for (const auto& m : models)
    if (m.role == role) return true;
  return false;
}

Generator generator_from(const std::vector<ModelEntry>& models) {
  const auto& e = find_role(models, "generator");
  GeneratorConfig cfg;
  try {
    cfg = GeneratorConfig::from_json(e.config);
  } catch (const Error& err) {
    throw Error(ErrorCode::InvalidCheckpoint, err.what());
  }
  if (cfg.vocab() != e.vocab) throw Error(ErrorCode::InvalidCheckpoint, "generator vocabulary disagrees with its config");
  return Generator(cfg, store_of(e));
}

Selector selector_from(const std::vector<ModelEntry>& models) {
  const auto& e = find_role(models, "selector");
  SelectorConfig cfg;
  try {
    cfg = SelectorConfig::from_json(e.config);
  } catch (const Error& err) {
    throw Error(ErrorCode::InvalidCheckpoint, err.what());
  }
  if (cfg.vocab() != e.vocab) throw Error(ErrorCode::InvalidCheckpoint, "selector vocabulary disagrees with its config");
  return Selector(cfg, store_of(e));
}

}  // namespace xmusic::checkpoint

#include "afg/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "afg/error.hpp"

namespace afg::model {
namespace {

constexpr char kMagic[8] = {'A', 'F', 'G', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("checkpoint " + path.string() + ": truncated file");
  return value;
}

struct Header {
  nlohmann::json json;
  std::streamoff data_offset = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + ": unsupported version " +
                    std::to_string(version));
  }
  const auto length = read_raw<std::uint64_t>(in, path);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("checkpoint " + path.string() + ": truncated header");
  Header h;
  try {
    h.json = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": malformed header: " + e.what());
  }
  h.data_offset = in.tellg();
  return h;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json header;
  header["model_config"] = to_json(model.config());
  header["tokenizer"] = {{"kind", to_string(model.tokenizer().kind())},
                         {"units", model.tokenizer().units()}};
  header["params"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& [name, p] : model.params()) {
    header["params"].push_back({{"name", name},
                                {"shape", p.value.shape},
                                {"trainable", p.trainable},
                                {"offset", offset}});
    offset += p.value.size();
  }
  header["adapters"] = nlohmann::ordered_json::array();
  for (const auto& [target, spec] : model.adapters()) {
    header["adapters"].push_back({{"target", target}, {"rank", spec.rank}, {"alpha", spec.alpha}});
  }
  header["meta"] = meta;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_raw(out, kCheckpointVersion);
  write_raw(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, p] : model.params()) {
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const Header h = read_header(in, path);
  try {
    ModelConfig config = model_config_from_json(h.json.at("model_config"));
    const auto& tok = h.json.at("tokenizer");
    Tokenizer tokenizer(parse_tokenizer_kind(tok.at("kind").get<std::string>()),
                        tok.at("units").get<std::vector<std::string>>());
    nn::ParamStore params;
    for (const auto& entry : h.json.at("params")) {
      nn::Tensor t(entry.at("shape").get<std::vector<std::size_t>>());
      const auto offset = entry.at("offset").get<std::size_t>();
      in.seekg(h.data_offset + static_cast<std::streamoff>(offset * sizeof(double)));
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
      if (!in) throw DataError("checkpoint " + path.string() + ": truncated parameter data");
      params.add(entry.at("name").get<std::string>(), std::move(t),
                 entry.at("trainable").get<bool>());
    }
    std::map<std::string, LoraSpec> adapters;
    for (const auto& entry : h.json.at("adapters")) {
      adapters[entry.at("target").get<std::string>()] =
          LoraSpec{entry.at("rank").get<int>(), entry.at("alpha").get<double>()};
    }
    return Model(std::move(config), std::move(tokenizer), std::move(params), std::move(adapters));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

nlohmann::json load_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const Header h = read_header(in, path);
  return h.json.value("meta", nlohmann::json::object());
}

}  // namespace afg::model

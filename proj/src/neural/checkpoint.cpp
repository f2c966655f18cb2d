#include "poseloop/neural/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>

#include "poseloop/common/error.hpp"
#include "poseloop/common/fsio.hpp"

namespace poseloop::neural {

namespace {
constexpr char kMagic[8] = {'P', 'L', 'C', 'K', 'P', 'T', '1', '\n'};
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = 1;
  header["layout"] = "f64-col-major-le";
  header["seed"] = store.seed;
  header["step"] = store.step;
  auto& params = header["params"] = nlohmann::json::array();
  for (const auto& p : store.params())
    params.push_back({{"name", p->name},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()}});
  std::string head = header.dump();

  std::string bytes;
  bytes.reserve(16 + head.size() + store.scalar_count() * sizeof(double));
  bytes.append(kMagic, sizeof(kMagic));
  std::uint64_t len = head.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  bytes.append(lenbuf, 8);
  bytes.append(head);
  for (const auto& p : store.params())
    bytes.append(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::size_t>(p->value.size()) * sizeof(double));
  write_file_atomic(path, bytes);
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  if (bytes.size() < 16 + len)
    throw DataError("checkpoint header truncated: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  if (header.value("format", 0) != 1)
    throw DataError("unsupported checkpoint format version in " + path.string());

  const auto& params = header.at("params");
  if (params.size() != store.params().size())
    throw DataError("checkpoint has " + std::to_string(params.size()) +
                    " params, model expects " + std::to_string(store.params().size()));

  std::size_t at = 16 + len;
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    Param& p = *store.params()[i];
    const auto& meta = params[i];
    if (meta.at("name").get<std::string>() != p.name)
      throw DataError("checkpoint param " + meta.at("name").get<std::string>() +
                      " does not match model param " + p.name);
    if (meta.at("rows").get<Eigen::Index>() != p.value.rows() ||
        meta.at("cols").get<Eigen::Index>() != p.value.cols())
      throw DataError("checkpoint shape mismatch for param " + p.name);
    std::size_t block = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    if (at + block > bytes.size())
      throw DataError("checkpoint payload truncated at param " + p.name);
    std::memcpy(p.value.data(), bytes.data() + at, block);
    at += block;
  }
  if (at != bytes.size())
    throw DataError("checkpoint has trailing bytes: " + path.string());
  store.seed = header.value("seed", std::uint64_t{0});
  store.step = header.value("step", std::uint64_t{0});
}

}  // namespace poseloop::neural

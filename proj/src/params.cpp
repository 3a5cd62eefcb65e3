#include "csakd/params.hpp"

#include <fstream>
#include <json.hpp>

#include "csakd/errors.hpp"

namespace csakd {

using nlohmann::json;

Tensor ParameterStore::param(const std::string& name, const std::vector<int>& shape,
                             const std::function<void(Array&)>& init) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (it->second.value().shape() != shape)
      throw ConfigError("ParameterStore: shape conflict for " + name);
    return it->second;
  }
  Array v(shape);
  init(v);
  Tensor t = Tensor::leaf(std::move(v), true);
  entries_.emplace(name, t);
  order_.push_back(name);
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("ParameterStore: missing " + name);
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.value().size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParameterStore::save(const std::filesystem::path& base) const {
  std::filesystem::create_directories(base.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : base.parent_path());
  json manifest;
  manifest["role"] = role_;
  manifest["order"] = order_;
  json entries = json::object();

  std::ofstream blob(base.string() + ".bin", std::ios::binary);
  if (!blob) throw DataError("ParameterStore::save: cannot open blob");
  std::size_t offset = 0;
  for (const std::string& name : order_) {
    const Array& v = entries_.at(name).value();
    std::vector<float> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
    blob.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
    entries[name] = {{"shape", v.shape()}, {"dtype", "f32"}, {"offset", offset}};
    offset += buf.size() * sizeof(float);
  }
  manifest["entries"] = entries;
  if (!blob) throw DataError("ParameterStore::save: blob write failed");
  blob.close();

  std::ofstream mf(base.string() + ".manifest.json");
  if (!mf) throw DataError("ParameterStore::save: cannot open manifest");
  mf << manifest.dump(2) << "\n";
}

ParameterStore ParameterStore::load(const std::filesystem::path& base) {
  std::ifstream mf(base.string() + ".manifest.json");
  if (!mf) throw DataError("ParameterStore::load: missing manifest for " + base.string());
  json manifest = json::parse(mf);

  std::ifstream blob(base.string() + ".bin", std::ios::binary);
  if (!blob) throw DataError("ParameterStore::load: missing blob for " + base.string());

  ParameterStore ps(manifest.at("role").get<std::string>());
  for (const auto& name : manifest.at("order")) {
    const json& e = manifest.at("entries").at(name.get<std::string>());
    if (e.at("dtype").get<std::string>() != "f32")
      throw DataError("ParameterStore::load: unexpected dtype");
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    Array v(shape);
    blob.seekg(static_cast<std::streamoff>(e.at("offset").get<std::size_t>()));
    std::vector<float> buf(v.size());
    blob.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (blob.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
      throw DataError("ParameterStore::load: short blob read");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(buf[i]);
    ps.param(name.get<std::string>(), shape, [&](Array& dst) { dst = std::move(v); });
  }
  return ps;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out(role_);
  for (const std::string& name : order_) {
    const Array& v = entries_.at(name).value();
    out.param(name, v.shape(), [&](Array& dst) { dst = v; });
  }
  return out;
}

}  // namespace csakd

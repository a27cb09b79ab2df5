#include "udg/checkpoint.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace udg {

namespace {

using nlohmann::json;

std::string encode_values(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 24);
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    if (i) out.push_back(' ');
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

std::vector<double> decode_values(const std::string& text, const std::string& name) {
  std::vector<double> out;
  const char* p = text.c_str();
  char* end = nullptr;
  while (*p != '\0') {
    errno = 0;
    const double v = std::strtod(p, &end);
    // Subnormals report ERANGE but parse exactly; only overflow is an error.
    if (end == p || (errno == ERANGE && !std::isfinite(v))) {
      throw CheckpointError("checkpoint: malformed value in '" + name + "'");
    }
    out.push_back(v);
    p = end;
    while (*p == ' ') ++p;
  }
  return out;
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& p : params) {
    if (p.name == name) return p.value;
  }
  throw CheckpointError("checkpoint: missing parameter '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const NamedTensor& p : params) {
    if (p.name == name) return true;
  }
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json doc;
  doc["version"] = ckpt.version;
  doc["config"] = ckpt.config;
  doc["iteration"] = ckpt.iteration;
  doc["rng"] = {{"seed", ckpt.rng_seed}, {"counter", ckpt.rng_counter}};
  json params = json::array();
  for (const NamedTensor& p : ckpt.params) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", encode_values(p.value.data())}});
  }
  doc["params"] = std::move(params);
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupted document: ") + e.what());
  }
  try {
    Checkpoint out;
    out.version = doc.at("version").get<int>();
    if (out.version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(out.version) + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    out.config = doc.at("config").get<std::map<std::string, std::string>>();
    out.iteration = doc.at("iteration").get<std::int64_t>();
    out.rng_seed = doc.at("rng").at("seed").get<std::uint64_t>();
    out.rng_counter = doc.at("rng").at("counter").get<std::uint64_t>();
    for (const json& p : doc.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      const Shape shape = p.at("shape").get<Shape>();
      const std::vector<double> values = decode_values(p.at("data").get<std::string>(), name);
      Index expected = 1;
      for (Index d : shape) expected *= d;
      if (static_cast<Index>(values.size()) != expected) {
        throw CheckpointError("checkpoint: corrupted parameter '" + name + "': shape " + to_string(shape) +
                              " needs " + std::to_string(expected) + " values, found " +
                              std::to_string(values.size()));
      }
      Tensor proto = Tensor::zeros(shape);
      Matrix m(proto.rows(), proto.cols());
      std::copy(values.begin(), values.end(), m.data());
      out.params.push_back({name, Tensor(shape, std::move(m))});
    }
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupted document: ") + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("checkpoint: corrupted shape: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    os << text;
    if (!os.flush()) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("checkpoint: cannot move into place " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace udg

#include "aero/checkpoint.hpp"

#include "aero/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aero::nn {

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream out;
  out << "aero-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (c > 0) out << ' ';
        out << io::format_double(t(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
  io::write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "aero-checkpoint") throw std::runtime_error(path.string() + ": not an aero checkpoint");
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  std::string tag;
  while (in >> tag) {
    if (tag == "end") return ckpt;
    if (tag == "meta") {
      std::string key, value;
      in >> key;
      std::getline(in, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      in >> name >> rows >> cols;
      Tensor2 t(rows, cols);
      for (double& v : t.values()) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error(path.string() + ": truncated tensor " + name);
        v = io::parse_double(tok);
      }
      ckpt.tensors.emplace(name, std::move(t));
    } else {
      throw std::runtime_error(path.string() + ": unexpected token '" + tag + "'");
    }
  }
  throw std::runtime_error(path.string() + ": missing end marker");
}

Checkpoint make_checkpoint(std::span<const Parameter* const> params) {
  Checkpoint ckpt;
  for (const Parameter* p : params) ckpt.tensors.emplace(p->name, p->value);
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint lacks parameter '" + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw std::runtime_error("checkpoint parameter '" + p->name + "' has shape " + shape_str(it->second) +
                               ", expected " + shape_str(p->value));
    }
    p->value = it->second;
    p->zero_grad();
  }
}

}  // namespace aero::nn

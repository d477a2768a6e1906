#include "docstormer/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace docstormer {

namespace {

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out.empty() ? "scalar" : out;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  if (text == "scalar") return s;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, 'x')) s.push_back(std::stoll(part));
  return s;
}

struct Header {
  std::string preset;
  std::uint64_t data_start = 0;
};

// magic[8] | u32 version | u32 preset length | preset bytes | tensor data
Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  std::uint32_t version = 0, len = 0;
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw CheckpointError("not a checkpoint: " + path.string());
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  in.read(reinterpret_cast<char*>(&len), 4);
  Header h;
  h.preset.resize(len);
  in.read(h.preset.data(), len);
  if (!in) throw CheckpointError("truncated checkpoint header: " + path.string());
  h.data_start = 16 + len;
  return h;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".manifest";
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const ParameterSet<float>*>& sets,
                     const std::string& preset) {
  std::filesystem::path tmp = path, mtmp = manifest_path(path);
  tmp += ".tmp";
  mtmp += ".tmp";
  std::ostringstream manifest;
  manifest << "version " << kCheckpointVersion << "\npreset " << preset << '\n';
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    const auto len = static_cast<std::uint32_t>(preset.size());
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(preset.data(), len);
    std::uint64_t offset = 16 + len;
    for (const auto* set : sets) {
      for (const auto& [name, t] : set->entries()) {
        auto d = t.data();
        out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
        manifest << name << ' ' << shape_text(t.shape()) << ' ' << offset << '\n';
        offset += d.size_bytes();
      }
    }
    out.flush();
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  {
    std::ofstream out(mtmp, std::ios::trunc);
    out << manifest.str();
    out.flush();
    if (!out) throw CheckpointError("failed writing " + mtmp.string());
  }
  commit(tmp, path);
  commit(mtmp, manifest_path(path));
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw CheckpointError("cannot open checkpoint " + path.string());
  const Header header = read_header(bin, path);
  std::ifstream in(manifest_path(path));
  if (!in) throw CheckpointError("missing checkpoint manifest " + manifest_path(path).string());
  CheckpointInfo info;
  std::string line, key;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream pl(line);
  pl >> key >> info.preset;
  if (key != "preset" || info.preset != header.preset) {
    throw CheckpointError("checkpoint manifest does not match " + path.string());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CheckpointEntry e;
    std::string shape;
    if (!(ls >> e.name >> shape >> e.offset)) throw CheckpointError("malformed manifest line: " + line);
    e.shape = parse_shape(shape);
    info.entries.push_back(std::move(e));
  }
  return info;
}

std::size_t load_checkpoint(const std::filesystem::path& path, ParameterSet<float>& target, const std::string& preset,
                            bool require_all) {
  const CheckpointInfo info = read_checkpoint_info(path);
  if (info.preset != preset) {
    throw CheckpointError("checkpoint " + path.string() + " was written for preset '" + info.preset +
                          "', not '" + preset + "'");
  }
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : info.entries) by_name[e.name] = &e;
  std::ifstream bin(path, std::ios::binary);
  std::size_t loaded = 0;
  for (const auto& [name, t] : target.entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      if (require_all) throw CheckpointError("checkpoint " + path.string() + " lacks parameter " + name);
      continue;
    }
    if (it->second->shape != t.shape()) {
      throw CheckpointError("parameter " + name + " has shape " + to_string(it->second->shape) + " in checkpoint, " +
                            to_string(t.shape()) + " in model");
    }
    Tensor<float> handle = t;
    auto d = handle.mutable_data();
    bin.seekg(static_cast<std::streamoff>(it->second->offset));
    bin.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
    if (!bin) throw CheckpointError("truncated checkpoint data for " + name);
    ++loaded;
  }
  return loaded;
}

}  // namespace docstormer

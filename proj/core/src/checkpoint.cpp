#include "snad/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace snad {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.tsv";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParameterSet& params) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# name\tshape\trole\tfile\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    const std::string file = p.name + ".snad";
    save_tensor((fs::path(dir) / file).string(), p.value);
    const Shape& s = p.value.shape();
    manifest << p.name << '\t' << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w << '\t' << p.role << '\t' << file
             << '\n';
  }
  write_file((fs::path(dir) / kManifest).string(), manifest.str());
}

void load_checkpoint(const std::string& dir, ParameterSet& params) {
  std::istringstream manifest(read_file((fs::path(dir) / kManifest).string()));
  std::string line;
  std::size_t seen = 0;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string name, shape, role, file;
    if (!std::getline(row, name, '\t') || !std::getline(row, shape, '\t') || !std::getline(row, role, '\t') ||
        !std::getline(row, file))
      throw std::runtime_error("malformed manifest line: " + line);
    Parameter* p = params.find(name);
    if (!p) throw std::runtime_error("checkpoint has unknown parameter " + name);
    Tensor t = load_tensor((fs::path(dir) / file).string());
    if (t.shape() != p->value.shape())
      throw ShapeError("checkpoint shape " + t.shape().str() + " for " + name + ", expected " + p->value.shape().str());
    p->value = std::move(t);
    ++seen;
  }
  if (seen != params.size())
    throw std::runtime_error("checkpoint lists " + std::to_string(seen) + " parameters, expected " +
                             std::to_string(params.size()));
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) { return parse_key_values(read_file(path)); }

std::string format_key_values(const KeyValues& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  return out.str();
}

void write_key_values(const std::string& path, const KeyValues& kv) { write_file(path, format_key_values(kv)); }

}  // namespace snad

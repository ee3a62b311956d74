#pragma once

#include <cstdint>
#include <string>

#include "snad/checkpoint.hpp"

namespace snad::cli {

/// Validation failures exit 1; logic errors (broken invariants) exit 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "text";  // text | json
};

struct SynthArgs {
  std::size_t count = 16;
  std::size_t size = 32;
};
struct BlurArgs {
  std::string input;
  std::string kernel = "linear45";  // linear45 | traj | identity
  std::size_t size = 25;
  double angle = 45.0;
  double noise = 0.0;
};
struct KernelArgs {
  std::size_t count = 16;
  std::size_t min_size = 13;
  std::size_t max_size = 29;
};
struct CheckArgs {
  std::string suite = "all";
};
struct TrainArgs {
  std::string data;
  std::string config;
  std::string report;
  std::size_t steps = 200;
  std::size_t count = 16;
  std::string norm = "sn";
};
struct MetricArgs {
  std::string a, b;
  std::string report;
};
struct TextureArgs {
  std::string input;
  std::string stencil = "4";
};
struct AblateArgs {
  std::string data;
  std::string report;
  std::size_t steps = 100;
  std::size_t count = 16;
};

int cmd_synth(const Globals& g, const SynthArgs& a);
int cmd_blur(const Globals& g, const BlurArgs& a);
int cmd_kernels(const Globals& g, const KernelArgs& a);
int cmd_check(const Globals& g, const CheckArgs& a);
int cmd_train_toy(const Globals& g, const TrainArgs& a);
int cmd_metrics(const Globals& g, const MetricArgs& a);
int cmd_texture(const Globals& g, const TextureArgs& a);
int cmd_ablate(const Globals& g, const AblateArgs& a);

/// Writes the resolved configuration next to the primary output: inside it
/// when it is a directory, as "<out>.config.txt" otherwise. No-op without --out.
void write_sidecar(const Globals& g, const std::string& command, const KeyValues& kv, bool out_is_dir);

}  // namespace snad::cli

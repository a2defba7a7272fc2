#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "stylid/error.hpp"
#include "stylid/pipeline.hpp"

namespace stylid::cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitAssertion = 3;

/// One parsed invocation with its fully resolved configuration.
struct Command {
  std::string name;  // render, stylize, diffuse, train, ablate-order, ablate-attention, ffc, attn-map
  PipelineConfig config;
  std::string out_dir = ".";
  std::string config_path;
  std::size_t jobs = 1;
  std::size_t faces = 1;
  std::size_t seed_count = 1;
  std::vector<double> intensities;
  bool zero_identity = false;
  std::size_t face_id = 0;
  bool record_timing = false;
  std::vector<std::string> files;

  bool operator==(const Command&) const = default;
};

const std::vector<std::string>& command_names();

/// Parses arguments (without the program name). Precedence for every config
/// value: explicit flag, then --config file, then built-in default; the seed
/// additionally falls back to CRAFT_SEED before the default. Throws
/// UsageError for unknown commands or flags, unreadable config files and
/// invalid values.
Command parse(const std::vector<std::string>& args);
Command parse(int argc, const char* const* argv);

/// Arguments that parse back to `cmd`; printed as the run header.
std::vector<std::string> to_args(const Command& cmd);

/// Runs the command, writing artifacts under cmd.out_dir and a header plus a
/// one-line summary to `out`. Returns the process exit code.
int execute(const Command& cmd, std::ostream& out, std::ostream& err);

/// parse + execute with the exit-code contract (usage errors map to 1).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes `content` to `path` through a temporary sibling and a rename, so a
/// failed run never leaves a partial file. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);

/// Reads a whitespace- or comma-separated list of numbers. Throws IoError if
/// the file cannot be read and InputError if it holds no numbers.
std::vector<double> read_vector_file(const std::string& path);

}  // namespace stylid::cli

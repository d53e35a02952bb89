#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace isoflow::cli {

using Json = nlohmann::ordered_json;

enum class Status { Verified, Violated, Error };

std::string_view status_name(Status s);

struct Witness {
  std::string location;
  double value = 0.0;
};

struct VerdictRecord {
  VerdictRecord() = default;
  explicit VerdictRecord(std::string name) : command(std::move(name)) {}

  std::string command;
  Status status = Status::Verified;
  Json metrics = Json::object();
  double tolerance = 0.0;
  double wall_time = 0.0;
  std::vector<Witness> witnesses;
  std::vector<std::string> notes;

  void violate(std::string location, double value);
};

Json to_json(const VerdictRecord& r);

struct RunOptions {
  std::filesystem::path out;
  int threads = 1;
  bool expect_bound = false;
};

const std::vector<std::string>& command_names();

/// splitmix64 of the seed mixed with an FNV-1a hash of `label`.
std::uint64_t split_seed(std::uint64_t seed, std::string_view label);

/// Runs one computational command, writing its files into opt.out.
/// Library errors raised during the computation become status Error.
VerdictRecord run_command(std::string_view name, const RunConfig& cfg, const Density& d, const RunOptions& opt);

/// 0 when every record is verified, otherwise the largest of 1 (error) and
/// 2 (violated) present.
int exit_code(const std::vector<VerdictRecord>& records);

/// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace isoflow::cli

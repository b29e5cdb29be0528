// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dsr {

// Exit codes shared by the C API and the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDivergence = 4,
  kExitGradCheck = 5,
};

using LogFn = std::function<void(const std::string&)>;

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::json report;
  /// Artifact paths written by the command (what the CLI prints on stdout).
  std::vector<std::string> artifacts;
  /// Human-readable text that is itself data (count-ops table).
  std::string text;
};

// Each command validates its whole config document before doing any work and
// rejects unknown keys. Errors surface as ConfigError / ContractViolation /
// IoError / DivergenceError; run_command maps them onto exit codes.

CommandResult cmd_datagen(const nlohmann::json& cfg, const LogFn& log);
CommandResult cmd_train(const nlohmann::json& cfg, const LogFn& log);
CommandResult cmd_infer(const nlohmann::json& cfg, const LogFn& log);
CommandResult cmd_count_ops(const nlohmann::json& cfg, const LogFn& log);
CommandResult cmd_grad_check(const nlohmann::json& cfg, const LogFn& log);
CommandResult cmd_psf_preview(const nlohmann::json& cfg, const LogFn& log);

std::vector<std::string> command_names();

/// Dispatches by name. Never throws: failures come back as a result whose
/// report holds {"error": message} and a non-zero exit code.
CommandResult run_command(const std::string& name, const nlohmann::json& cfg, const LogFn& log);

}  // namespace dsr

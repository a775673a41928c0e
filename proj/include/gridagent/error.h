#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridagent {

enum class ErrorCode {
  // grid-model
  DanglingReference,
  MultipleSlack,
  NoSlack,
  DuplicateId,
  InvalidNetwork,
  UnknownElement,
  UnknownBranch,
  ZeroImpedanceBranch,
  // case-io
  SyntaxError,
  SchemaError,
  SemanticError,
  UnsupportedConstruct,
  UnknownCase,
  // powerflow
  SingularJacobian,
  NoSlackInIsland,
  // violation-analysis
  StaleSolution,
  DivergedAnalysis,
  // action-space
  InvalidAction,
  // planner
  NoImprovingPlan,
  NoJsonFound,
  SchemaMismatch,
  UnknownTool,
  InvalidArguments,
  TransportError,
  UnparseableAfterRepair,
  // harness
  TargetUnreachable,
  WriteError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gridagent

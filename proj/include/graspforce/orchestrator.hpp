#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graspforce/geometry.hpp"

namespace graspforce {

/// Workspace safety level. Stop dominates Alert dominates Clear when several
/// sources disagree at the same instant.
enum class SafetyStatus { Clear, Alert, Stop };

const char* to_string(SafetyStatus s);

/// Cap a commanded twist per the current safety status: Clear passes the
/// command through, Alert clamps each axis to v_cap_alert * vmax, Stop zeroes
/// the twist entirely.
Twist6 apply_safety(SafetyStatus status, const Twist6& cmd,
                    double v_cap_alert, const Twist6& vmax);

/// Timestamped safety status records for replay. The control loop reads the
/// latest status at each cycle.
class SafetyFeed {
 public:
  struct Record {
    double t;
    SafetyStatus status;
  };

  SafetyFeed() = default;
  explicit SafetyFeed(std::vector<Record> records);

  SafetyStatus status_at(double t) const;
  bool empty() const { return records_.empty(); }

  /// Parse JSON lines / array of {"t": .., "status": "clear|alert|stop"}.
  static SafetyFeed from_json_text(const std::string& text);
  static SafetyFeed from_file(const std::string& path);

 private:
  std::vector<Record> records_;  // sorted by t; severity wins on ties
};

// ---------------------------------------------------------------------------
// Task planner (state machine wrapping skill execution)
// ---------------------------------------------------------------------------

enum class PlannerState {
  Idle,
  AwaitVision,
  SelectStrategy,
  DispatchSkill,
  AwaitResult,
  ConfirmVision,
  CallHuman,
  Done,
};

const char* to_string(PlannerState s);

enum class PlannerEventKind {
  TaskStart,
  VisionData,
  StrategyChosen,
  SkillStarted,
  SkillSucceeded,
  SkillFailed,
  ConfirmationOk,
  ConfirmationConflict,
  HumanResolved,
};

struct PlannerEvent {
  PlannerEventKind kind;
};

enum class PlannerActionKind {
  None,
  RequestVision,
  ChooseStrategy,
  RunSkill,        // dispatch with a fresh observation draw
  RequestConfirmation,
  CallHumanOperator,
  ReportDone,
};

struct PlannerAction {
  PlannerActionKind kind = PlannerActionKind::None;
};

struct IllegalTransition : std::logic_error {
  using std::logic_error::logic_error;
};

/// Resolution rule when the vision confirmation disagrees with a reported
/// skill success.
enum class ConflictPolicy { PreferVision, PreferSkill, AlwaysHuman };

class Planner {
 public:
  explicit Planner(int max_retries = 2,
                   ConflictPolicy policy = ConflictPolicy::AlwaysHuman)
      : max_retries_(max_retries), policy_(policy) {}

  PlannerState state() const { return state_; }
  int retry_count() const { return retry_count_; }

  /// Advance the machine; returns the action the caller must perform.
  /// Throws IllegalTransition for events not legal in the current state.
  PlannerAction step(const PlannerEvent& event);

 private:
  PlannerState state_ = PlannerState::Idle;
  int retry_count_ = 0;
  int max_retries_;
  ConflictPolicy policy_;
};

/// Free-function form: (state, event) -> (state, action).
std::pair<PlannerState, PlannerAction> planner_step(Planner& planner,
                                                    const PlannerEvent& event);

}  // namespace graspforce

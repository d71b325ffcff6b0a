#include "graspforce/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace graspforce {

using nlohmann::json;

const char* to_string(SafetyStatus s) {
  switch (s) {
    case SafetyStatus::Clear: return "clear";
    case SafetyStatus::Alert: return "alert";
    case SafetyStatus::Stop: return "stop";
  }
  return "?";
}

Twist6 apply_safety(SafetyStatus status, const Twist6& cmd,
                    double v_cap_alert, const Twist6& vmax) {
  switch (status) {
    case SafetyStatus::Clear:
      return cmd;
    case SafetyStatus::Alert: {
      Vec6 v = cmd.stacked();
      const Vec6 cap = v_cap_alert * vmax.stacked().cwiseAbs();
      for (int i = 0; i < 6; ++i) v[i] = std::clamp(v[i], -cap[i], cap[i]);
      return Twist6::from_stacked(v, cmd.frame);
    }
    case SafetyStatus::Stop:
      return Twist6::zero(cmd.frame);
  }
  return cmd;
}

SafetyFeed::SafetyFeed(std::vector<Record> records)
    : records_(std::move(records)) {
  std::stable_sort(records_.begin(), records_.end(),
                   [](const Record& a, const Record& b) { return a.t < b.t; });
  // at equal timestamps the most severe status wins
  for (size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].t == records_[i - 1].t &&
        static_cast<int>(records_[i].status) <
            static_cast<int>(records_[i - 1].status))
      records_[i].status = records_[i - 1].status;
  }
}

SafetyStatus SafetyFeed::status_at(double t) const {
  SafetyStatus s = SafetyStatus::Clear;
  for (const auto& r : records_) {
    if (r.t > t) break;
    s = r.status;
  }
  return s;
}

SafetyFeed SafetyFeed::from_json_text(const std::string& text) {
  std::vector<Record> recs;
  auto parse_one = [&](const json& j) {
    Record r;
    r.t = j.at("t").get<double>();
    const std::string s = j.at("status").get<std::string>();
    if (s == "clear")
      r.status = SafetyStatus::Clear;
    else if (s == "alert")
      r.status = SafetyStatus::Alert;
    else if (s == "stop")
      r.status = SafetyStatus::Stop;
    else
      throw std::invalid_argument("safety record: unknown status '" + s + "'");
    recs.push_back(r);
  };

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    for (const auto& j : json::parse(text)) parse_one(j);
  } else {  // JSON lines
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      parse_one(json::parse(line));
    }
  }
  return SafetyFeed(std::move(recs));
}

SafetyFeed SafetyFeed::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open safety file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const char* to_string(PlannerState s) {
  switch (s) {
    case PlannerState::Idle: return "Idle";
    case PlannerState::AwaitVision: return "AwaitVision";
    case PlannerState::SelectStrategy: return "SelectStrategy";
    case PlannerState::DispatchSkill: return "DispatchSkill";
    case PlannerState::AwaitResult: return "AwaitResult";
    case PlannerState::ConfirmVision: return "ConfirmVision";
    case PlannerState::CallHuman: return "CallHuman";
    case PlannerState::Done: return "Done";
  }
  return "?";
}

PlannerAction Planner::step(const PlannerEvent& event) {
  auto illegal = [&]() -> IllegalTransition {
    return IllegalTransition(std::string("planner: event ") +
                             std::to_string(static_cast<int>(event.kind)) +
                             " not legal in state " + to_string(state_));
  };

  switch (state_) {
    case PlannerState::Idle:
      if (event.kind == PlannerEventKind::TaskStart) {
        state_ = PlannerState::AwaitVision;
        retry_count_ = 0;
        return {PlannerActionKind::RequestVision};
      }
      throw illegal();

    case PlannerState::AwaitVision:
      if (event.kind == PlannerEventKind::VisionData) {
        state_ = PlannerState::SelectStrategy;
        return {PlannerActionKind::ChooseStrategy};
      }
      throw illegal();

    case PlannerState::SelectStrategy:
      if (event.kind == PlannerEventKind::StrategyChosen) {
        state_ = PlannerState::DispatchSkill;
        return {PlannerActionKind::RunSkill};
      }
      throw illegal();

    case PlannerState::DispatchSkill:
      if (event.kind == PlannerEventKind::SkillStarted) {
        state_ = PlannerState::AwaitResult;
        return {PlannerActionKind::None};
      }
      throw illegal();

    case PlannerState::AwaitResult:
      if (event.kind == PlannerEventKind::SkillSucceeded) {
        state_ = PlannerState::ConfirmVision;
        return {PlannerActionKind::RequestConfirmation};
      }
      if (event.kind == PlannerEventKind::SkillFailed) {
        if (retry_count_ < max_retries_) {
          ++retry_count_;
          state_ = PlannerState::DispatchSkill;
          return {PlannerActionKind::RunSkill};
        }
        state_ = PlannerState::CallHuman;
        return {PlannerActionKind::CallHumanOperator};
      }
      throw illegal();

    case PlannerState::ConfirmVision:
      if (event.kind == PlannerEventKind::ConfirmationOk) {
        state_ = PlannerState::Done;
        return {PlannerActionKind::ReportDone};
      }
      if (event.kind == PlannerEventKind::ConfirmationConflict) {
        switch (policy_) {
          case ConflictPolicy::PreferSkill:
            state_ = PlannerState::Done;
            return {PlannerActionKind::ReportDone};
          case ConflictPolicy::PreferVision:
            if (retry_count_ < max_retries_) {
              ++retry_count_;
              state_ = PlannerState::DispatchSkill;
              return {PlannerActionKind::RunSkill};
            }
            [[fallthrough]];
          case ConflictPolicy::AlwaysHuman:
            state_ = PlannerState::CallHuman;
            return {PlannerActionKind::CallHumanOperator};
        }
      }
      throw illegal();

    case PlannerState::CallHuman:
      if (event.kind == PlannerEventKind::HumanResolved) {
        state_ = PlannerState::Idle;
        retry_count_ = 0;
        return {PlannerActionKind::None};
      }
      throw illegal();

    case PlannerState::Done:
      throw illegal();
  }
  throw illegal();
}

std::pair<PlannerState, PlannerAction> planner_step(Planner& planner,
                                                    const PlannerEvent& event) {
  const PlannerAction a = planner.step(event);
  return {planner.state(), a};
}

}  // namespace graspforce

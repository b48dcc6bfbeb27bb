#pragma once

#include <array>
#include <string>

namespace echofight::arena {

constexpr int kNumActions = 40;
constexpr int kNoAction = -1;  // "hold": the simulator accepts it as no input

// Category layout is fixed: 2 throw + 12 attack + 3 skill + 7 movement +
// 2 guard on the ground, 12 attack + 2 skill in the air. CROUCH is omitted.
enum class ActionCategory {
  throw_ground,
  attack_ground,
  skill_ground,
  movement_ground,
  guard_ground,
  attack_air,
  skill_air,
};

const char* category_name(ActionCategory c);
ActionCategory category_from(const std::string& name);

struct ActionDef {
  int id = 0;
  std::string name;
  ActionCategory category = ActionCategory::attack_ground;
  int damage = 0;
  int range = 0;  // center-to-center stage units; 0 for non-hitting actions
  int startup = 0;
  int active = 0;
  int recovery = 0;
  int move_dx = 0;           // per-frame drift while active, forward positive
  bool jump = false;         // movement that leaves the ground
  int projectile_speed = 0;  // fireball skills; 0 = no projectile

  int total_frames() const { return startup + active + recovery; }
  bool is_attack() const {
    return category == ActionCategory::attack_ground || category == ActionCategory::attack_air ||
           category == ActionCategory::throw_ground ||
           (damage > 0 && projectile_speed == 0 &&
            (category == ActionCategory::skill_ground || category == ActionCategory::skill_air));
  }
};

// The 40-action frame-data table. Defaults are tuned so that attacks land in
// a handful of frames and typical rounds end well before the 60 s limit.
class ActionTable {
 public:
  static ActionTable defaults();
  static ActionTable load(const std::string& path);  // "actions-v1" text
  void save(const std::string& path) const;

  const ActionDef& operator[](int id) const { return defs_[static_cast<size_t>(id)]; }
  const std::array<ActionDef, kNumActions>& all() const { return defs_; }

 private:
  void validate() const;  // ids 0..39 once each, category counts exact
  std::array<ActionDef, kNumActions> defs_;
};

}  // namespace echofight::arena

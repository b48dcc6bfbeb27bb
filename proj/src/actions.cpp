#include "echofight/actions.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "echofight/errors.hpp"

namespace echofight::arena {

const char* category_name(ActionCategory c) {
  switch (c) {
    case ActionCategory::throw_ground: return "throw";
    case ActionCategory::attack_ground: return "attack-ground";
    case ActionCategory::skill_ground: return "skill-ground";
    case ActionCategory::movement_ground: return "movement";
    case ActionCategory::guard_ground: return "guard";
    case ActionCategory::attack_air: return "attack-air";
    case ActionCategory::skill_air: return "skill-air";
  }
  return "?";
}

ActionCategory category_from(const std::string& name) {
  for (auto c : {ActionCategory::throw_ground, ActionCategory::attack_ground,
                 ActionCategory::skill_ground, ActionCategory::movement_ground,
                 ActionCategory::guard_ground, ActionCategory::attack_air,
                 ActionCategory::skill_air}) {
    if (name == category_name(c)) return c;
  }
  throw ConfigError("unknown action category '" + name + "'");
}

namespace {
ActionDef make(int id, const char* name, ActionCategory cat, int dmg, int range, int su, int act,
               int rec, int move = 0, bool jump = false, int proj = 0) {
  ActionDef d;
  d.id = id;
  d.name = name;
  d.category = cat;
  d.damage = dmg;
  d.range = range;
  d.startup = su;
  d.active = act;
  d.recovery = rec;
  d.move_dx = move;
  d.jump = jump;
  d.projectile_speed = proj;
  return d;
}
}  // namespace

ActionTable ActionTable::defaults() {
  using C = ActionCategory;
  ActionTable t;
  auto& d = t.defs_;
  // throws (unguardable, short range)
  d[0] = make(0, "THROW_A", C::throw_ground, 25, 42, 5, 2, 16);
  d[1] = make(1, "THROW_B", C::throw_ground, 40, 38, 8, 2, 22);
  // ground attacks
  d[2] = make(2, "JAB", C::attack_ground, 8, 62, 3, 2, 6);
  d[3] = make(3, "STRAIGHT", C::attack_ground, 12, 70, 4, 2, 8);
  d[4] = make(4, "HOOK", C::attack_ground, 16, 66, 6, 2, 10);
  d[5] = make(5, "UPPER", C::attack_ground, 18, 56, 7, 3, 12);
  d[6] = make(6, "BODY_BLOW", C::attack_ground, 14, 60, 5, 2, 9);
  d[7] = make(7, "LOW_KICK", C::attack_ground, 10, 76, 4, 2, 8);
  d[8] = make(8, "MID_KICK", C::attack_ground, 15, 86, 6, 3, 11);
  d[9] = make(9, "HIGH_KICK", C::attack_ground, 20, 92, 8, 3, 14);
  d[10] = make(10, "SWEEP", C::attack_ground, 12, 96, 7, 3, 13);
  d[11] = make(11, "ELBOW", C::attack_ground, 13, 52, 4, 2, 7);
  d[12] = make(12, "KNEE", C::attack_ground, 14, 56, 5, 2, 8);
  d[13] = make(13, "ROUNDHOUSE", C::attack_ground, 24, 102, 10, 4, 18);
  // ground skills; the fireballs launch projectiles
  d[14] = make(14, "FIREBALL", C::skill_ground, 30, 0, 12, 2, 26, 0, false, 18);
  d[15] = make(15, "MEGA_FIREBALL", C::skill_ground, 48, 0, 18, 2, 34, 0, false, 12);
  d[16] = make(16, "RISING_BREAK", C::skill_ground, 42, 72, 9, 4, 28);
  // movement
  d[17] = make(17, "WALK_FWD", C::movement_ground, 0, 0, 0, 6, 0, 3);
  d[18] = make(18, "WALK_BACK", C::movement_ground, 0, 0, 0, 6, 0, -3);
  d[19] = make(19, "DASH_FWD", C::movement_ground, 0, 0, 0, 8, 4, 8);
  d[20] = make(20, "DASH_BACK", C::movement_ground, 0, 0, 0, 8, 4, -8);
  d[21] = make(21, "JUMP_UP", C::movement_ground, 0, 0, 0, 28, 2, 0, true);
  d[22] = make(22, "JUMP_FWD", C::movement_ground, 0, 0, 0, 28, 2, 4, true);
  d[23] = make(23, "JUMP_BACK", C::movement_ground, 0, 0, 0, 28, 2, -4, true);
  // guards (blocking window = active frames)
  d[24] = make(24, "GUARD_HIGH", C::guard_ground, 0, 0, 1, 14, 3);
  d[25] = make(25, "GUARD_LOW", C::guard_ground, 0, 0, 1, 22, 5);
  // air attacks
  d[26] = make(26, "AIR_JAB", C::attack_air, 8, 60, 3, 2, 5);
  d[27] = make(27, "AIR_STRAIGHT", C::attack_air, 12, 68, 4, 2, 7);
  d[28] = make(28, "AIR_HOOK", C::attack_air, 15, 64, 5, 2, 9);
  d[29] = make(29, "AIR_UPPER", C::attack_air, 17, 56, 6, 3, 10);
  d[30] = make(30, "AIR_KICK", C::attack_air, 14, 80, 4, 2, 8);
  d[31] = make(31, "AIR_MID_KICK", C::attack_air, 16, 88, 6, 3, 10);
  d[32] = make(32, "AIR_HIGH_KICK", C::attack_air, 20, 94, 8, 3, 12);
  d[33] = make(33, "AIR_ELBOW", C::attack_air, 12, 52, 3, 2, 6);
  d[34] = make(34, "AIR_KNEE", C::attack_air, 13, 58, 4, 2, 7);
  d[35] = make(35, "AIR_SWEEP", C::attack_air, 15, 96, 7, 3, 11);
  d[36] = make(36, "AIR_CHOP", C::attack_air, 11, 62, 4, 2, 6);
  d[37] = make(37, "AIR_SLAM", C::attack_air, 26, 100, 9, 4, 12);
  // air skills
  d[38] = make(38, "AIR_FIREBALL", C::skill_air, 24, 0, 10, 2, 18, 0, false, 18);
  d[39] = make(39, "AIR_DIVE", C::skill_air, 34, 82, 8, 4, 14);
  t.validate();
  return t;
}

void ActionTable::validate() const {
  std::map<ActionCategory, int> counts;
  for (int i = 0; i < kNumActions; ++i) {
    const auto& d = defs_[static_cast<size_t>(i)];
    if (d.id != i) throw ConfigError("action table: id " + std::to_string(d.id) +
                                     " at slot " + std::to_string(i));
    if (d.name == "CROUCH") throw ConfigError("action table: CROUCH is not part of the action set");
    if (d.damage < 0 || d.startup < 0 || d.active < 0 || d.recovery < 0)
      throw ConfigError("action table: negative frame data for " + d.name);
    counts[d.category] += 1;
  }
  const std::map<ActionCategory, int> want = {
      {ActionCategory::throw_ground, 2},  {ActionCategory::attack_ground, 12},
      {ActionCategory::skill_ground, 3},  {ActionCategory::movement_ground, 7},
      {ActionCategory::guard_ground, 2},  {ActionCategory::attack_air, 12},
      {ActionCategory::skill_air, 2},
  };
  for (const auto& [cat, n] : want) {
    const auto it = counts.find(cat);
    const int got = it == counts.end() ? 0 : it->second;
    if (got != n)
      throw ConfigError(std::string("action table: expected ") + std::to_string(n) + " " +
                        category_name(cat) + " actions, got " + std::to_string(got));
  }
}

void ActionTable::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ConfigError("action table: cannot write " + path);
  f << "actions-v1\n";
  for (const auto& d : defs_) {
    f << "action " << d.id << " " << d.name << " " << category_name(d.category) << " " << d.damage
      << " " << d.range << " " << d.startup << " " << d.active << " " << d.recovery << " "
      << d.move_dx << " " << (d.jump ? 1 : 0) << " " << d.projectile_speed << "\n";
  }
}

ActionTable ActionTable::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("action table: cannot open " + path);
  std::string header;
  std::getline(f, header);
  if (header != "actions-v1")
    throw ConfigError("action table: bad header '" + header + "' in " + path);
  ActionTable t;
  std::array<bool, kNumActions> seen{};
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag, name, cat;
    ActionDef d;
    int jump = 0;
    ss >> tag >> d.id >> name >> cat >> d.damage >> d.range >> d.startup >> d.active >>
        d.recovery >> d.move_dx >> jump >> d.projectile_speed;
    if (tag != "action" || !ss)
      throw ConfigError("action table: malformed line '" + line + "' in " + path);
    if (d.id < 0 || d.id >= kNumActions)
      throw ConfigError("action table: id out of range in " + path);
    if (seen[static_cast<size_t>(d.id)])
      throw ConfigError("action table: duplicate id " + std::to_string(d.id) + " in " + path);
    seen[static_cast<size_t>(d.id)] = true;
    d.name = name;
    d.category = category_from(cat);
    d.jump = jump != 0;
    t.defs_[static_cast<size_t>(d.id)] = d;
  }
  for (int i = 0; i < kNumActions; ++i)
    if (!seen[static_cast<size_t>(i)])
      throw ConfigError("action table: missing id " + std::to_string(i) + " in " + path);
  t.validate();
  return t;
}

}  // namespace echofight::arena

#pragma once

// Deterministic synthetic videos with known motion.

#include <cstdint>
#include <string>
#include <vector>

#include "cvlm/frame.hpp"

namespace cvlm {

enum class ScenarioKind { static_scene, translating_object, multi_object, noise, scene_cut };

const char* to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

struct Box {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool operator==(const Box&) const = default;
};

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::translating_object;
    int width = 64;
    int height = 64;
    int frames = 32;
    int fps = 2;
    int vx = 1;  // px/frame
    int vy = 0;
    int object_size = 16;
    int objects = 3;      // multi_object only
    int cut_frame = -1;   // scene_cut only; -1 = frames / 2
    std::uint64_t seed = 1;
};

struct Scenario {
    RawVideo video;
    std::vector<std::vector<Box>> truth;  // per frame, one box per object
};

/// Objects are textured squares over a static textured background; they
/// bounce off the frame edges.
Scenario generate_scenario(const ScenarioSpec& spec);

}  // namespace cvlm

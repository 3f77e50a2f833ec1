#include "cvlm/scenario.hpp"

#include <random>

#include "cvlm/error.hpp"

namespace cvlm {

const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::static_scene: return "static";
        case ScenarioKind::translating_object: return "translating_object";
        case ScenarioKind::multi_object: return "multi_object";
        case ScenarioKind::noise: return "noise";
        case ScenarioKind::scene_cut: return "scene_cut";
    }
    return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
    if (s == "static") return ScenarioKind::static_scene;
    if (s == "translating_object") return ScenarioKind::translating_object;
    if (s == "multi_object") return ScenarioKind::multi_object;
    if (s == "noise") return ScenarioKind::noise;
    if (s == "scene_cut") return ScenarioKind::scene_cut;
    throw InvalidArgument("unknown scenario kind: " + s);
}

namespace {

Frame noise_frame(int w, int h, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dist(0, 255);
    Frame f(w, h);
    for (auto& v : f.plane) v = static_cast<std::uint8_t>(dist(rng));
    return f;
}

struct Mover {
    Frame texture;
    int x, y, vx, vy;

    Box box() const { return {x, y, texture.width, texture.height}; }

    void step(int w, int h) {
        auto bounce = [](int& p, int& v, int limit) {
            int n = p + v;
            if (n < 0 || n > limit) {
                v = -v;
                n = p + v;
            }
            p = n < 0 ? 0 : (n > limit ? limit : n);
        };
        bounce(x, vx, w - texture.width);
        bounce(y, vy, h - texture.height);
    }
};

void paint(Frame& dst, const Mover& m) {
    for (int y = 0; y < m.texture.height; ++y)
        for (int x = 0; x < m.texture.width; ++x) dst.at(m.x + x, m.y + y) = m.texture.at(x, y);
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0 || spec.frames <= 0 || spec.fps <= 0) {
        throw InvalidArgument("scenario: dimensions, length and fps must be positive");
    }
    const bool has_objects = spec.kind == ScenarioKind::translating_object || spec.kind == ScenarioKind::multi_object;
    if (has_objects && (spec.object_size <= 0 || spec.object_size > spec.width || spec.object_size > spec.height)) {
        throw InvalidArgument("scenario: object larger than frame");
    }

    std::mt19937_64 rng(spec.seed);
    Scenario sc;
    sc.video.width = spec.width;
    sc.video.height = spec.height;
    sc.video.fps = spec.fps;
    sc.truth.resize(static_cast<std::size_t>(spec.frames));

    const Frame background = noise_frame(spec.width, spec.height, rng);

    std::vector<Mover> movers;
    if (has_objects) {
        const int n = spec.kind == ScenarioKind::multi_object ? std::max(1, spec.objects) : 1;
        std::uniform_int_distribution<int> px(0, spec.width - spec.object_size);
        std::uniform_int_distribution<int> py(0, spec.height - spec.object_size);
        for (int i = 0; i < n; ++i) {
            Mover m{noise_frame(spec.object_size, spec.object_size, rng), 0, 0, spec.vx, spec.vy};
            if (n == 1) {
                m.x = (spec.width - spec.object_size) / 2;
                m.y = (spec.height - spec.object_size) / 2;
            } else {
                m.x = px(rng);
                m.y = py(rng);
                // vary direction per object, keep speed
                if (i % 2 == 1) std::swap(m.vx, m.vy);
                if (i % 3 == 2) m.vx = -m.vx;
            }
            movers.push_back(std::move(m));
        }
    }

    const int cut = spec.cut_frame < 0 ? spec.frames / 2 : spec.cut_frame;
    Frame cut_background;
    if (spec.kind == ScenarioKind::scene_cut) cut_background = noise_frame(spec.width, spec.height, rng);

    for (int t = 0; t < spec.frames; ++t) {
        Frame f;
        switch (spec.kind) {
            case ScenarioKind::static_scene: f = background; break;
            case ScenarioKind::noise: f = noise_frame(spec.width, spec.height, rng); break;
            case ScenarioKind::scene_cut: f = t < cut ? background : cut_background; break;
            case ScenarioKind::translating_object:
            case ScenarioKind::multi_object:
                f = background;
                for (auto& m : movers) {
                    if (t > 0) m.step(spec.width, spec.height);
                    paint(f, m);
                    sc.truth[static_cast<std::size_t>(t)].push_back(m.box());
                }
                break;
        }
        sc.video.frames.push_back(std::move(f));
    }
    return sc;
}

}  // namespace cvlm

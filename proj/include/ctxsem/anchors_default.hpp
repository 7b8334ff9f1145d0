#pragma once

#include "ctxsem/projection.hpp"

namespace ctxsem {

// Built-in anchor endpoints for the nature and transportation contexts, for
// both the adjective and the contextual (in-domain object) projection modes.
// Each feature has 3 low-end and 3 high-end anchors per mode.
inline AnchorConfig default_anchor_config() {
    struct Row {
        const char* feature;
        const char* adj_low[3];
        const char* adj_high[3];
        const char* obj_low[3];
        const char* obj_high[3];
    };

    static const Row kNature[] = {
        {"size", {"small", "little", "tiny"}, {"big", "large", "huge"},
         {"bird", "rabbit", "rat"}, {"lion", "giraffe", "elephant"}},
        {"domesticity", {"wild", "untamed", "undomesticated"}, {"domestic", "pet", "tamed"},
         {"fish", "pig", "ferret"}, {"shark", "lion", "panther"}},
        {"predacity", {"quarry", "prey", "herbivore"}, {"ferocious", "predatory", "carnivorous"},
         {"rabbit", "goose", "swan"}, {"shark", "lion", "wolf"}},
        {"speed", {"slow", "sluggish", "gradual"}, {"fast", "quick", "speedy"},
         {"sloth", "snail", "tortoise"}, {"leopard", "cheetah", "hummingbird"}},
        {"furriness", {"smooth", "sleek", "rough"}, {"fast", "quick", "speedy"},
         {"penguin", "dolphin", "frog"}, {"puma", "dog", "lion"}},
        {"aquaticness", {"terrestrial", "land", "walking"}, {"water", "aquatic", "swimming"},
         {"lion", "panther", "dog"}, {"dolphin", "fish", "frog"}},
        {"dangerousness", {"dangerous", "unsafe", "threatening"}, {"safe", "harmless", "innocuous"},
         {"swan", "rabbit", "goose"}, {"shark", "lion", "scorpion"}},
        {"edibility", {"uneatable", "inedible", "indigestible"}, {"delicious", "edible", "food"},
         {"dog", "lion", "elephant"}, {"cow", "veal", "chicken"}},
        {"intelligence", {"dumb", "stupid", "idiotic"}, {"smart", "intelligent", "wise"},
         {"lizard", "goose", "snail"}, {"crow", "elephant", "dolphin"}},
        {"humanness", {"inhuman", "animal", "wild"}, {"human", "anthropomorphic", "humanist"},
         {"goose", "swan", "frog"}, {"dog", "ape", "monkey"}},
        {"cuteness", {"ugly", "repulsive", "hideous"}, {"cute", "adorable", "attractive"},
         {"shark", "raccoon", "lizard"}, {"rabbit", "dog", "giraffe"}},
        {"interest", {"uninteresting", "lame", "boring"}, {"interesting", "cool", "exciting"},
         {"goose", "pigeon", "snail"}, {"gorilla", "dolphin", "lion"}},
    };

    static const Row kTransportation[] = {
        {"size", {"small", "little", "tiny"}, {"big", "large", "huge"},
         {"segway", "scooter", "skateboard"}, {"spaceship", "carrier", "airliner"}},
        {"cost", {"cheap", "affordable", "inexpensive"}, {"costly", "expensive", "pricey"},
         {"bike", "scooter", "skateboard"}, {"fighter", "spaceship", "carrier"}},
        {"openness", {"covered", "windowless", "enclosed"}, {"uncovered", "open", "exposed"},
         {"spaceship", "jet", "tank"}, {"convertible", "skateboard", "scooter"}},
        {"speed", {"slow", "sluggish", "gradual"}, {"fast", "quick", "speedy"},
         {"van", "barge", "bus"}, {"speedboat", "racecar", "spaceship"}},
        {"wheeledness", {"hull", "smooth", "propelled"}, {"wheeled", "wheels", "tire"},
         {"kayak", "speedboat", "spaceship"}, {"convertible", "racecar", "bus"}},
        {"dangerousness", {"dangerous", "unsafe", "threatening"}, {"safe", "harmless", "innocuous"},
         {"canoe", "cart", "buggy"}, {"spaceship", "destroyer", "jet"}},
        {"elevation", {"underwater", "low", "deep"}, {"high", "elevated", "skyward"},
         {"automobile", "convertible", "yacht"}, {"spaceship", "satellite", "jet"}},
        {"comfort", {"uncomfortable", "cramped", "hunched"}, {"comfortable", "cozy", "relaxing"},
         {"scooter", "cart", "tractor"}, {"sedan", "yacht", "train"}},
        {"skill", {"simple", "novice", "unskilled"}, {"complex", "skilled", "experienced"},
         {"tricycle", "bus", "train"}, {"aircraft", "spaceship", "jet"}},
        {"personalness", {"impersonal", "public", "shared"}, {"personal", "intimate", "private"},
         {"airliner", "spaceship", "carrier"}, {"skateboard", "sportscar", "yacht"}},
        {"usefulness", {"uncommon", "useless", "novelty"}, {"useful", "usable", "common"},
         {"skateboard", "yacht", "jetpack"}, {"airliner", "bus", "train"}},
        {"interest", {"uninteresting", "lame", "boring"}, {"interesting", "cool", "exciting"},
         {"scooter", "minivan", "train"}, {"jet", "spaceship", "yacht"}},
    };

    AnchorConfig cfg;
    auto add = [&cfg](const char* context, const Row* rows, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const Row& r = rows[i];
            AnchorEntry adj;
            adj.context = context;
            adj.feature = r.feature;
            adj.mode = ProjectionMode::adjective;
            adj.low = {r.adj_low[0], r.adj_low[1], r.adj_low[2]};
            adj.high = {r.adj_high[0], r.adj_high[1], r.adj_high[2]};
            cfg.entries.push_back(std::move(adj));
            AnchorEntry obj;
            obj.context = context;
            obj.feature = r.feature;
            obj.mode = ProjectionMode::contextual;
            obj.low = {r.obj_low[0], r.obj_low[1], r.obj_low[2]};
            obj.high = {r.obj_high[0], r.obj_high[1], r.obj_high[2]};
            cfg.entries.push_back(std::move(obj));
        }
    };
    add("nature", kNature, std::size(kNature));
    add("transportation", kTransportation, std::size(kTransportation));
    return cfg;
}

} // namespace ctxsem

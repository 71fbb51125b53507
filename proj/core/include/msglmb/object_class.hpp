#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace msglmb {

/// The seven nuScenes tracking classes.
enum class ObjectClass : int {
    Pedestrian = 0,
    Car,
    Truck,
    Bus,
    Trailer,
    Motorcycle,
    Bicycle,
};

inline constexpr int kNumClasses = 7;

inline constexpr std::array<ObjectClass, kNumClasses> kAllClasses = {
    ObjectClass::Pedestrian, ObjectClass::Car,        ObjectClass::Truck,
    ObjectClass::Bus,        ObjectClass::Trailer,    ObjectClass::Motorcycle,
    ObjectClass::Bicycle,
};

inline std::string_view to_string(ObjectClass c) {
    static constexpr std::array<std::string_view, kNumClasses> names = {
        "pedestrian", "car", "truck", "bus", "trailer", "motorcycle", "bicycle"};
    return names[static_cast<size_t>(c)];
}

inline std::optional<ObjectClass> class_from_string(std::string_view name) {
    for (ObjectClass c : kAllClasses) {
        if (to_string(c) == name) return c;
    }
    return std::nullopt;
}

}  // namespace msglmb

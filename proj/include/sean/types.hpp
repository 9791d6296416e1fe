#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sean/error.hpp"

namespace sean {

/// Dense user index. Ordering follows first registration, which is also the
/// tie-break order used by the explorer.
struct UserId {
    std::uint32_t value = 0;

    constexpr UserId() = default;
    constexpr explicit UserId(std::uint32_t v) : value(v) {}
    constexpr std::size_t index() const { return value; }
    constexpr auto operator<=>(const UserId&) const = default;
};

/// Maps external user names to dense ids.
class UserRegistry {
public:
    UserId intern(std::string_view name) {
        auto it = ids_.find(std::string(name));
        if (it != ids_.end()) return it->second;
        UserId id(static_cast<std::uint32_t>(names_.size()));
        names_.emplace_back(name);
        ids_.emplace(names_.back(), id);
        return id;
    }

    UserId at(std::string_view name) const {
        auto it = ids_.find(std::string(name));
        if (it == ids_.end()) throw LookupError("unknown user '" + std::string(name) + "'");
        return it->second;
    }

    bool contains(std::string_view name) const { return ids_.count(std::string(name)) > 0; }

    const std::string& name(UserId id) const {
        if (id.index() >= names_.size()) throw LookupError("user id out of range: " + std::to_string(id.value));
        return names_[id.index()];
    }

    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, UserId> ids_;
};

} // namespace sean

template <>
struct std::hash<sean::UserId> {
    std::size_t operator()(const sean::UserId& u) const noexcept { return std::hash<std::uint32_t>{}(u.value); }
};

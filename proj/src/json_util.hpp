#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "arbmarl/errors.hpp"

namespace arbmarl::detail {

template <class E = SchemaError>
void require_object(const nlohmann::json& j, std::string_view context) {
    if (!j.is_object()) throw E(std::string(context) + ": expected an object");
}

/// Rejects keys outside `allowed`.
template <class E = SchemaError>
void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                std::string_view context) {
    require_object<E>(j, context);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw E(std::string(context) + ": unknown key '" + it.key() + "'");
    }
}

template <class T, class E = SchemaError>
T required(const nlohmann::json& j, const char* key, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end()) throw E(std::string(context) + ": missing key '" + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& ex) {
        throw E(std::string(context) + ": bad value for '" + key + "': " + ex.what());
    }
}

template <class T, class E = SchemaError>
T optional(const nlohmann::json& j, const char* key, T fallback, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& ex) {
        throw E(std::string(context) + ": bad value for '" + key + "': " + ex.what());
    }
}

/// Reads a number where JSON `null` stands for +infinity (unlimited).
template <class E = SchemaError>
double limit_or_inf(const nlohmann::json& j, const char* key, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end()) throw E(std::string(context) + ": missing key '" + key + "'");
    if (it->is_null()) return HUGE_VAL;
    if (!it->is_number()) throw E(std::string(context) + ": '" + key + "' must be a number or null");
    return it->get<double>();
}

inline nlohmann::json limit_to_json(double v) {
    return std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace arbmarl::detail

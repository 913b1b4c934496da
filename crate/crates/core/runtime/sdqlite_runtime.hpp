// Runtime support for generated sdqlite kernels.
//
// dict_type is a hash map whose operator[] inserts the additive identity for
// missing keys, so nested destinations accumulate with `d[i][j] += v`.
// arr_type is a zero-filled contiguous array. The sdg1 namespace reads the
// little-endian SDG1 dump format written by the `sdql` CLI.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

template <class T>
struct arr_type {
    std::vector<T> data;

    arr_type() = default;
    explicit arr_type(size_t n) : data(n, T()) {}
    explicit arr_type(std::vector<T> xs) : data(std::move(xs)) {}

    size_t size() const { return data.size(); }
    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }
    typename std::vector<T>::iterator begin() { return data.begin(); }
    typename std::vector<T>::iterator end() { return data.end(); }
    typename std::vector<T>::const_iterator begin() const { return data.begin(); }
    typename std::vector<T>::const_iterator end() const { return data.end(); }
};

template <class K, class V>
struct dict_type {
    std::unordered_map<K, V> map;

    V& operator[](const K& k) { return map[k]; }
    size_t size() const { return map.size(); }
    auto begin() { return map.begin(); }
    auto end() { return map.end(); }
    auto begin() const { return map.begin(); }
    auto end() const { return map.end(); }

    dict_type& operator+=(const dict_type& other) {
        for (const auto& [k, v] : other.map) map[k] += v;
        return *this;
    }

    dict_type operator*(double s) const {
        dict_type out;
        for (const auto& [k, v] : map) out.map.emplace(k, v * s);
        return out;
    }
};

namespace runtime {

inline double neg_sin(double x) { return -std::sin(x); }
inline double neg_cos(double x) { return -std::cos(x); }
inline double recip(double x) { return 1.0 / x; }

template <class T>
const T& get(const arr_type<T>& a, size_t i) { return a[i]; }

/// Lookup without insertion; a missing key reads as the additive identity.
template <class K, class V>
V get(const dict_type<K, V>& d, size_t k) {
    auto it = d.map.find(K(k));
    return it == d.map.end() ? V() : it->second;
}

inline void add_to(double& a, double b) { a += b; }

template <class K, class V>
void add_to(dict_type<K, V>& a, const dict_type<K, V>& b) { a += b; }

inline bool is_zero(double x) { return x == 0.0; }

template <class K, class V>
bool is_zero(const dict_type<K, V>& d) {
    for (const auto& [k, v] : d.map)
        if (!is_zero(v)) return false;
    return true;
}

inline void print(std::string& out, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    out += s;
}

/// Value literal with keys in ascending order and zero entries elided.
template <class K, class V>
void print(std::string& out, const dict_type<K, V>& d) {
    std::vector<K> keys;
    for (const auto& [k, v] : d.map)
        if (!is_zero(v)) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    out += "{";
    for (size_t n = 0; n < keys.size(); n++) {
        out += n ? ", " : " ";
        out += std::to_string(keys[n]) + " -> ";
        print(out, d.map.at(keys[n]));
    }
    out += keys.empty() ? "}" : " }";
}

template <class T>
std::string show(const T& x) {
    std::string s;
    print(s, x);
    return s;
}

/// Checks the semiring laws the generated code relies on; returns the number of failures.
inline int runtime_self_test() {
    int failed = 0;
    auto check = [&](bool ok, const char* law) {
        if (!ok) {
            std::fprintf(stderr, "runtime law failed: %s\n", law);
            failed++;
        }
    };
    dict_type<size_t, double> d;
    d[3] += 2.0;
    check(get(d, size_t(3)) == 2.0, "auto-vivified key accumulates");
    check(get(d, size_t(4)) == 0.0 && d.size() == 1, "lookup of an absent key does not insert");
    dict_type<size_t, double> a, b;
    a[0] = 1.0;
    b[0] = 2.0;
    b[1] = 3.0;
    a += b;
    check(show(a) == "{ 0 -> 3.0, 1 -> 3.0 }", "pointwise merge");
    check(is_zero(d * 0.0) && show(d * 0.0) == "{}", "annihilation by zero");
    dict_type<size_t, dict_type<size_t, double>> m;
    m[1][2] += 0.5;
    m[1][2] += 0.25;
    m[0][0] += 1.0;
    check(show(m) == "{ 0 -> { 0 -> 1.0 }, 1 -> { 2 -> 0.75 } }", "nested chained accumulation");
    dict_type<size_t, dict_type<size_t, double>> n;
    n[1][2] = 1.0;
    m += n;
    check(get(get(m, size_t(1)), size_t(2)) == 1.75, "nested merge");
    dict_type<size_t, double> e;
    e += a;
    check(show(e) == show(a), "empty dictionary is the additive identity");
    check(show(a * 2.0) == "{ 0 -> 6.0, 1 -> 6.0 }", "scaling");
    arr_type<double> z(4);
    check(z.size() == 4 && z[0] == 0.0 && z[3] == 0.0, "zero-filled array");
    return failed;
}

}  // namespace runtime

namespace sdg1 {

enum Kind : uint8_t { Real = 0, Int = 1, IndexArray = 2, ValueArray = 3, Dict = 4 };

struct Record {
    Kind kind;
    uint64_t depth = 0;
    std::vector<uint64_t> ints;
    std::vector<double> reals;
};

using File = std::map<std::string, Record>;

namespace detail {
template <class T>
T read(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("SDG1: truncated file");
    uint64_t bits = 0;
    for (size_t i = 0; i < sizeof(T); i++) bits |= uint64_t(b[i]) << (8 * i);
    T x;
    if constexpr (sizeof(T) == 1) {
        x = T(bits);
    } else {
        static_assert(sizeof(T) == 8, "SDG1 fields are one or eight bytes");
        std::memcpy(&x, &bits, 8);
    }
    return x;
}
}  // namespace detail

inline File load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("SDG1: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "SDG1") throw std::runtime_error("SDG1: bad magic");
    File f;
    uint64_t count = detail::read<uint64_t>(in);
    for (uint64_t r = 0; r < count; r++) {
        std::string name(detail::read<uint64_t>(in), '\0');
        in.read(name.data(), std::streamsize(name.size()));
        Record rec;
        rec.kind = Kind(detail::read<uint8_t>(in));
        switch (rec.kind) {
            case Real: rec.reals.push_back(detail::read<double>(in)); break;
            case Int: rec.ints.push_back(detail::read<uint64_t>(in)); break;
            case IndexArray: {
                uint64_t n = detail::read<uint64_t>(in);
                for (uint64_t i = 0; i < n; i++) rec.ints.push_back(detail::read<uint64_t>(in));
                break;
            }
            case ValueArray: {
                uint64_t n = detail::read<uint64_t>(in);
                for (uint64_t i = 0; i < n; i++) rec.reals.push_back(detail::read<double>(in));
                break;
            }
            case Dict: {
                rec.depth = detail::read<uint64_t>(in);
                uint64_t n = detail::read<uint64_t>(in);
                for (uint64_t i = 0; i < n * rec.depth; i++) rec.ints.push_back(detail::read<uint64_t>(in));
                for (uint64_t i = 0; i < n; i++) rec.reals.push_back(detail::read<double>(in));
                break;
            }
            default: throw std::runtime_error("SDG1: unknown record kind for " + name);
        }
        f.emplace(std::move(name), std::move(rec));
    }
    return f;
}

inline const Record& find(const File& f, const std::string& name, Kind kind) {
    auto it = f.find(name);
    if (it == f.end()) throw std::runtime_error("SDG1: missing record " + name);
    if (it->second.kind != kind) throw std::runtime_error("SDG1: record " + name + " has the wrong kind");
    return it->second;
}

inline double real(const File& f, const std::string& name) { return find(f, name, Real).reals.at(0); }

inline size_t index(const File& f, const std::string& name) { return size_t(find(f, name, Int).ints.at(0)); }

inline arr_type<size_t> index_array(const File& f, const std::string& name) {
    const Record& r = find(f, name, IndexArray);
    return arr_type<size_t>(std::vector<size_t>(r.ints.begin(), r.ints.end()));
}

inline arr_type<double> value_array(const File& f, const std::string& name) {
    return arr_type<double>(find(f, name, ValueArray).reals);
}

namespace detail {
inline void insert(double& d, const uint64_t*, double v) { d += v; }

template <class K, class V>
void insert(dict_type<K, V>& d, const uint64_t* keys, double v) {
    insert(d[K(keys[0])], keys + 1, v);
}

template <class T>
struct depth_of { static constexpr uint64_t value = 0; };

template <class K, class V>
struct depth_of<dict_type<K, V>> { static constexpr uint64_t value = 1 + depth_of<V>::value; };
}  // namespace detail

/// Reads a dictionary record into a nested dict_type of matching depth.
template <class D>
D dict(const File& f, const std::string& name) {
    const Record& r = find(f, name, Dict);
    if (r.depth != detail::depth_of<D>::value) throw std::runtime_error("SDG1: record " + name + " has the wrong depth");
    D d;
    for (size_t e = 0; e < r.reals.size(); e++) detail::insert(d, &r.ints[e * r.depth], r.reals[e]);
    return d;
}

}  // namespace sdg1

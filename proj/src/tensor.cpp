#include "sneq/tensor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sneq/binary_io.hpp"
#include "sneq/rng.hpp"

namespace sneq {

Permutation Permutation::identity(int n) {
    if (n < 1) throw std::invalid_argument("Permutation: n must be positive");
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return Permutation(std::move(v));
}

Permutation::Permutation(std::vector<int> images) : images_(std::move(images)) {
    const int n = static_cast<int>(images_.size());
    if (n < 1) throw std::invalid_argument("Permutation: empty image list");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int v : images_) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument("Permutation: images are not a bijection");
        seen[static_cast<std::size_t>(v)] = 1;
    }
}

Permutation Permutation::from_one_based(const std::vector<int>& images) {
    std::vector<int> v(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) v[i] = images[i] - 1;
    return Permutation(std::move(v));
}

Permutation Permutation::inverse() const {
    std::vector<int> inv(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i)
        inv[static_cast<std::size_t>(images_[i])] = static_cast<int>(i);
    return Permutation(std::move(inv));
}

std::string Permutation::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < images_.size(); ++i) {
        if (i) os << ',';
        os << images_[i] + 1;
    }
    os << ')';
    return os.str();
}

Permutation compose(const Permutation& second, const Permutation& first) {
    if (second.n() != first.n()) throw std::invalid_argument("compose: size mismatch");
    std::vector<int> v(static_cast<std::size_t>(first.n()));
    for (int i = 0; i < first.n(); ++i) v[static_cast<std::size_t>(i)] = second.image(first.image(i));
    return Permutation(std::move(v));
}

EquivariantTensor::EquivariantTensor(int n, int order, int channels)
    : n_(n), order_(order), channels_(channels) {
    if (n < 1) throw std::invalid_argument("EquivariantTensor: n must be positive");
    if (order < 0 || order > 3) throw std::invalid_argument("EquivariantTensor: order must be 0..3");
    if (channels < 1) throw std::invalid_argument("EquivariantTensor: channels must be positive");
    entries_ = 1;
    for (int k = 0; k < order; ++k) entries_ *= static_cast<std::size_t>(n);
    values_.assign(entries_ * static_cast<std::size_t>(channels), 0.0);
}

namespace {
[[noreturn]] void arity_error(int order, int arity) {
    std::ostringstream os;
    os << "EquivariantTensor::at: " << arity << " indices for order-" << order << " tensor";
    throw std::invalid_argument(os.str());
}
}  // namespace

double& EquivariantTensor::at(int c) {
    if (order_ != 0) arity_error(order_, 0);
    return values_[static_cast<std::size_t>(c)];
}
double& EquivariantTensor::at(int i, int c) {
    if (order_ != 1) arity_error(order_, 1);
    return values_[static_cast<std::size_t>(i) * channels_ + c];
}
double& EquivariantTensor::at(int i, int j, int c) {
    if (order_ != 2) arity_error(order_, 2);
    return values_[(static_cast<std::size_t>(i) * n_ + j) * channels_ + c];
}
double& EquivariantTensor::at(int i, int j, int k, int c) {
    if (order_ != 3) arity_error(order_, 3);
    return values_[((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * channels_ + c];
}
double EquivariantTensor::at(int c) const { return const_cast<EquivariantTensor*>(this)->at(c); }
double EquivariantTensor::at(int i, int c) const {
    return const_cast<EquivariantTensor*>(this)->at(i, c);
}
double EquivariantTensor::at(int i, int j, int c) const {
    return const_cast<EquivariantTensor*>(this)->at(i, j, c);
}
double EquivariantTensor::at(int i, int j, int k, int c) const {
    return const_cast<EquivariantTensor*>(this)->at(i, j, k, c);
}

void EquivariantTensor::unflatten(std::size_t entry, int* indices) const {
    for (int k = order_ - 1; k >= 0; --k) {
        indices[k] = static_cast<int>(entry % static_cast<std::size_t>(n_));
        entry /= static_cast<std::size_t>(n_);
    }
}

std::size_t EquivariantTensor::flatten(const int* indices) const {
    std::size_t e = 0;
    for (int k = 0; k < order_; ++k) e = e * static_cast<std::size_t>(n_) + static_cast<std::size_t>(indices[k]);
    return e;
}

EquivariantTensor act(const Permutation& sigma, const EquivariantTensor& f) {
    if (f.order() == 0) return f;
    if (sigma.n() != f.n()) throw std::invalid_argument("act: size mismatch");
    const Permutation inv = sigma.inverse();
    EquivariantTensor out(f.n(), f.order(), f.channels());
    int idx[3], src[3];
    for (std::size_t e = 0; e < out.entry_count(); ++e) {
        out.unflatten(e, idx);
        for (int k = 0; k < f.order(); ++k) src[k] = inv.image(idx[k]);
        const std::size_t se = f.flatten(src);
        for (int c = 0; c < f.channels(); ++c) out.value(e, c) = f.value(se, c);
    }
    return out;
}

Permutation random_permutation(int n, std::uint64_t seed) {
    RandomStream rs(seed);
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    rs.shuffle(v);
    return Permutation(std::move(v));
}

EquivariantTensor random_tensor(int n, int order, int channels, std::uint64_t seed) {
    RandomStream rs(seed);
    EquivariantTensor t(n, order, channels);
    for (double& v : t.raw()) v = rs.normal();
    return t;
}

void save_tensor(const EquivariantTensor& t, std::ostream& os) {
    io::write_magic(os, "SNEQ");
    io::write_u32(os, 1);
    io::write_u32(os, static_cast<std::uint32_t>(t.n()));
    io::write_u32(os, static_cast<std::uint32_t>(t.order()));
    io::write_u32(os, static_cast<std::uint32_t>(t.channels()));
    for (double v : t.raw()) io::write_f64(os, v);
    if (!os) throw std::runtime_error("save_tensor: write failed");
}

void save_tensor(const EquivariantTensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_tensor: cannot open " + path);
    save_tensor(t, os);
}

EquivariantTensor load_tensor(std::istream& is) {
    io::expect_magic(is, "SNEQ");
    const auto version = io::read_u32(is);
    if (version != 1) throw std::runtime_error("load_tensor: unsupported version");
    const int n = static_cast<int>(io::read_u32(is));
    const int order = static_cast<int>(io::read_u32(is));
    const int channels = static_cast<int>(io::read_u32(is));
    EquivariantTensor t(n, order, channels);
    for (double& v : t.raw()) v = io::read_f64(is);
    return t;
}

EquivariantTensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_tensor: cannot open " + path);
    return load_tensor(is);
}

}  // namespace sneq

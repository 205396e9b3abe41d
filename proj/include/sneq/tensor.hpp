#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sneq {

/// Permutation of {1..n}, stored one-line and 0-based internally.
/// All user-facing I/O (construction from lists, printing) is 1-based.
class Permutation {
public:
    static Permutation identity(int n);

    /// images[i] = image of i, 0-based.
    explicit Permutation(std::vector<int> images);

    /// images[i] = image of i+1, 1-based, e.g. {2,3,1}.
    static Permutation from_one_based(const std::vector<int>& images);

    int n() const { return static_cast<int>(images_.size()); }
    int image(int i) const { return images_[static_cast<std::size_t>(i)]; }
    Permutation inverse() const;
    std::string to_string() const;  // 1-based, "(2,3,1)"

    bool operator==(const Permutation&) const = default;

private:
    std::vector<int> images_;
};

/// compose(s2, s1) maps i to s2(s1(i)).
Permutation compose(const Permutation& second, const Permutation& first);

/// Dense order-k (k = 0..3) multi-channel tensor over an index set of size n.
/// Storage is row-major over the k indices with the channel axis innermost,
/// so entry (i1,..,ik,c) lives at flat position (i1*n^(k-1)+..+ik)*channels+c.
class EquivariantTensor {
public:
    EquivariantTensor(int n, int order, int channels);  // zero-filled

    int n() const { return n_; }
    int order() const { return order_; }
    int channels() const { return channels_; }

    /// Number of index tuples, n^order.
    std::size_t entry_count() const { return entries_; }

    double value(std::size_t entry, int channel) const {
        return values_[entry * channels_ + channel];
    }
    double& value(std::size_t entry, int channel) {
        return values_[entry * channels_ + channel];
    }

    // Indexed access; the arity must match the order (checked).
    double& at(int c);
    double& at(int i, int c);
    double& at(int i, int j, int c);
    double& at(int i, int j, int k, int c);
    double at(int c) const;
    double at(int i, int c) const;
    double at(int i, int j, int c) const;
    double at(int i, int j, int k, int c) const;

    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw() const { return values_; }

    /// Decompose a flat entry index into its order() tuple indices.
    void unflatten(std::size_t entry, int* indices) const;
    std::size_t flatten(const int* indices) const;

    bool operator==(const EquivariantTensor&) const = default;

private:
    int n_, order_, channels_;
    std::size_t entries_;
    std::vector<double> values_;
};

/// [act(sigma, f)]_{i1..ik} = f_{sigma^-1(i1)..sigma^-1(ik)} per channel.
/// Order-0 tensors are returned unchanged.
EquivariantTensor act(const Permutation& sigma, const EquivariantTensor& f);

/// Uniformly random permutation (Fisher-Yates) — deterministic per seed.
Permutation random_permutation(int n, std::uint64_t seed);

/// Tensor with i.i.d. standard-normal entries — deterministic per seed.
EquivariantTensor random_tensor(int n, int order, int channels, std::uint64_t seed);

// Versioned little-endian binary block: magic "SNEQ", version, n, order,
// channels (u32 each), then the values as 64-bit floats.
void save_tensor(const EquivariantTensor& t, std::ostream& os);
void save_tensor(const EquivariantTensor& t, const std::string& path);
EquivariantTensor load_tensor(std::istream& is);
EquivariantTensor load_tensor(const std::string& path);

}  // namespace sneq

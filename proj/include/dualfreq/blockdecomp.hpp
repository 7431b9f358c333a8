#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "dualfreq/common.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// Whole image plus recursive quadrant sub-blocks. levels[d] holds 4^d
/// blocks of shape [C, H/2^d, W/2^d], ordered TL,TR,BL,BR recursively.
template <class T>
struct BlockPyramidT {
    std::vector<std::vector<TensorT<T>>> levels;

    std::size_t depth() const { return levels.empty() ? 0 : levels.size() - 1; }
    std::size_t total_blocks() const {
        std::size_t n = 0;
        for (const auto& level : levels) n += level.size();
        return n;
    }
};

using BlockPyramid = BlockPyramidT<float>;

/// Split a [C,H,W] block into its four quadrants, returned in the fixed
/// order top-left, top-right, bottom-left, bottom-right.
template <class T>
std::array<TensorT<T>, 4> split_quadrants(const TensorT<T>& block) {
    if (block.rank() != 3) throw ShapeError("split_quadrants expects a rank-3 [C,H,W] block");
    const std::size_t C = block.dim(0), H = block.dim(1), W = block.dim(2);
    if (H % 2 != 0 || W % 2 != 0) {
        throw ShapeError("split_quadrants requires even extents, got " +
                         TensorT<T>::shape_string(block.shape()));
    }
    const std::size_t h = H / 2, w = W / 2;
    std::array<TensorT<T>, 4> out = {
        TensorT<T>({C, h, w}), TensorT<T>({C, h, w}),
        TensorT<T>({C, h, w}), TensorT<T>({C, h, w})};
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                out[0].at3(c, i, j) = block.at3(c, i, j);
                out[1].at3(c, i, j) = block.at3(c, i, j + w);
                out[2].at3(c, i, j) = block.at3(c, i + h, j);
                out[3].at3(c, i, j) = block.at3(c, i + h, j + w);
            }
        }
    }
    return out;
}

/// Levels 0..depth inclusive; level d+1 splits every level-d block in order.
template <class T>
BlockPyramidT<T> build_pyramid(const TensorT<T>& image, std::size_t depth) {
    if (image.rank() != 3) throw ShapeError("build_pyramid expects a rank-3 [C,H,W] image");
    const std::size_t H = image.dim(1), W = image.dim(2);
    const std::size_t div = std::size_t(1) << depth;
    if (H % div != 0 || W % div != 0) {
        throw ShapeError("image extents " + TensorT<T>::shape_string(image.shape()) +
                         " not divisible by 2^" + std::to_string(depth));
    }
    BlockPyramidT<T> pyramid;
    pyramid.levels.push_back({image});
    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<TensorT<T>> next;
        next.reserve(pyramid.levels[d].size() * 4);
        for (const auto& block : pyramid.levels[d]) {
            auto quads = split_quadrants(block);
            for (auto& q : quads) next.push_back(std::move(q));
        }
        pyramid.levels.push_back(std::move(next));
    }
    return pyramid;
}

} // namespace dualfreq

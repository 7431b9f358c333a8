#include <gtest/gtest.h>

#include "dualfreq/blockdecomp.hpp"
#include "dualfreq/rng.hpp"

using namespace dualfreq;

namespace {

Tensor random_image(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
    Tensor t({c, h, w});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_float();
    return t;
}

// Stitch four quadrants back together by position.
Tensor reassemble(const std::array<Tensor, 4>& q) {
    const std::size_t C = q[0].dim(0), h = q[0].dim(1), w = q[0].dim(2);
    Tensor out({C, 2 * h, 2 * w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                out.at3(c, i, j) = q[0].at3(c, i, j);
                out.at3(c, i, j + w) = q[1].at3(c, i, j);
                out.at3(c, i + h, j) = q[2].at3(c, i, j);
                out.at3(c, i + h, j + w) = q[3].at3(c, i, j);
            }
        }
    }
    return out;
}

} // namespace

TEST(SplitQuadrants, SmallestEvenCase) {
    const Tensor block({1, 2, 2}, {1, 2, 3, 4});
    const auto q = split_quadrants(block);
    EXPECT_EQ(q[0][0], 1.0f); // TL
    EXPECT_EQ(q[1][0], 2.0f); // TR
    EXPECT_EQ(q[2][0], 3.0f); // BL
    EXPECT_EQ(q[3][0], 4.0f); // BR
}

TEST(SplitQuadrants, PaperBlockSizes) {
    Rng rng(3);
    const Tensor image = random_image(3, 32, 32, rng);
    const auto q = split_quadrants(image);
    for (const auto& b : q) {
        EXPECT_EQ(b.shape(), (Tensor::Shape{3, 16, 16}));
    }
}

TEST(SplitQuadrants, PartitionReassembles) {
    Rng rng(4);
    const Tensor image = random_image(2, 8, 10, rng);
    const Tensor back = reassemble(split_quadrants(image));
    ASSERT_TRUE(back.same_shape(image));
    for (std::size_t i = 0; i < image.size(); ++i) EXPECT_EQ(back[i], image[i]);
}

TEST(SplitQuadrants, OddExtentsRejected) {
    EXPECT_THROW(split_quadrants(Tensor({1, 3, 4})), ShapeError);
    EXPECT_THROW(split_quadrants(Tensor({1, 4, 5})), ShapeError);
    EXPECT_THROW(split_quadrants(Tensor({4, 4})), ShapeError);
}

TEST(BuildPyramid, PaperBlockCounts) {
    Rng rng(5);
    const Tensor image = random_image(3, 32, 32, rng);

    const auto d2 = build_pyramid(image, 2);
    EXPECT_EQ(d2.total_blocks(), 21u); // 1 + 4 + 16
    EXPECT_EQ(d2.levels[2].size(), 16u);
    EXPECT_EQ(d2.levels[2][0].shape(), (Tensor::Shape{3, 8, 8}));

    const auto d1 = build_pyramid(image, 1);
    EXPECT_EQ(d1.total_blocks(), 5u); // whole + four 16x16
    EXPECT_EQ(d1.levels[1][0].shape(), (Tensor::Shape{3, 16, 16}));

    const auto d0 = build_pyramid(image, 0);
    EXPECT_EQ(d0.total_blocks(), 1u);
    for (std::size_t i = 0; i < image.size(); ++i) EXPECT_EQ(d0.levels[0][0][i], image[i]);
}

TEST(BuildPyramid, BlockCountFormula) {
    Rng rng(6);
    const Tensor image = random_image(1, 16, 16, rng);
    for (std::size_t d = 0; d <= 3; ++d) {
        const auto p = build_pyramid(image, d);
        const std::size_t expected = ((std::size_t(1) << (2 * (d + 1))) - 1) / 3;
        EXPECT_EQ(p.total_blocks(), expected) << "depth " << d;
        for (std::size_t l = 0; l < p.levels.size(); ++l) {
            EXPECT_EQ(p.levels[l].size(), std::size_t(1) << (2 * l));
        }
    }
}

TEST(BuildPyramid, DivisibilityViolationRejected) {
    EXPECT_THROW(build_pyramid(Tensor({1, 12, 12}), 3), ShapeError);
    EXPECT_THROW(build_pyramid(Tensor({1, 32, 24}), 4), ShapeError);
}

TEST(BuildPyramid, LosslessSubGrids) {
    Rng rng(7);
    const Tensor image = random_image(2, 16, 16, rng);
    const auto p = build_pyramid(image, 2);
    // Level-2 block 0 is the TL quadrant of the TL quadrant.
    const auto& b = p.levels[2][0];
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                EXPECT_EQ(b.at3(c, i, j), image.at3(c, i, j));
            }
        }
    }
    // Level-2 block 15 is the BR of the BR.
    const auto& last = p.levels[2][15];
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                EXPECT_EQ(last.at3(c, i, j), image.at3(c, 12 + i, 12 + j));
            }
        }
    }
}

TEST(BuildPyramid, OrderingIsStable) {
    Rng rng(8);
    const Tensor image = random_image(1, 8, 8, rng);
    const auto p1 = build_pyramid(image, 1);
    const auto p2 = build_pyramid(image, 1);
    ASSERT_EQ(p1.levels.size(), p2.levels.size());
    for (std::size_t l = 0; l < p1.levels.size(); ++l) {
        ASSERT_EQ(p1.levels[l].size(), p2.levels[l].size());
        for (std::size_t b = 0; b < p1.levels[l].size(); ++b) {
            for (std::size_t i = 0; i < p1.levels[l][b].size(); ++i) {
                EXPECT_EQ(p1.levels[l][b][i], p2.levels[l][b][i]);
            }
        }
    }
}

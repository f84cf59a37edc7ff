// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mpq/rng.hpp"

namespace mpq {
namespace {

TEST(Rng, StreamIsDeterministic) {
    Rng a = make_stream(42, "noise", 3);
    Rng b = make_stream(42, "noise", 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsAreDistinct) {
    const auto first = [](Rng r) { return r(); };
    const auto base = first(make_stream(42, "noise", 3));
    EXPECT_NE(base, first(make_stream(43, "noise", 3)));
    EXPECT_NE(base, first(make_stream(42, "hutchinson", 3)));
    EXPECT_NE(base, first(make_stream(42, "noise", 4)));
}

TEST(Rng, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64("", 0), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a", 1), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar", 6), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace mpq

#pragma once

#include <gtest/gtest.h>

#include "fraclap/error.hpp"

// Expects `stmt` to throw fraclap::Error carrying the expected code.
#define EXPECT_ERRC(stmt, expected_)                                                   \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << fraclap::to_string(expected_) << ", no throw";  \
    } catch (const fraclap::Error& e_) {                                          \
      EXPECT_EQ(e_.code(), expected_) << e_.what();                                    \
    }                                                                             \
  } while (0)

#include "quadrature_oracle.hpp"

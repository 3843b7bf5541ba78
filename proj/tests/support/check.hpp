#pragma once

#include <doctest.h>

#include "wba/error.hpp"

// Expects `expr` to throw wba::Error carrying `errc`.
#define CHECK_ERRC(expr, errc)                                              \
  do {                                                                      \
    try {                                                                   \
      (void)(expr);                                                         \
      FAIL_CHECK("expected " #errc " from " #expr);                         \
    } catch (const wba::Error& wba_check_error_) {                          \
      CHECK_MESSAGE(wba_check_error_.code() == (errc), wba_check_error_.what()); \
    }                                                                       \
  } while (0)

// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

int main() { std::puts("nerv cli placeholder"); }

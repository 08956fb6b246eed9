#pragma once

#include <fracevo/analysis.hpp>
#include <fracevo/core.hpp>
#include <fracevo/errors.hpp>
#include <fracevo/evolution.hpp>
#include <fracevo/kernel.hpp>
#include <fracevo/operators.hpp>
#include <fracevo/quadrature.hpp>
#include <fracevo/special_fn.hpp>

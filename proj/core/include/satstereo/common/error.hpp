// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace satstereo {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// RPC denominator vanished at the query point.
class SingularProjection : public Error {
 public:
  using Error::Error;
};

/// Affine camera fit exceeded the caller's residual tolerance.
class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Geometric configuration with too few degrees of freedom (collinear
/// samples, fewer than three hull points, ...).
class Degeneracy : public Error {
 public:
  using Error::Error;
};

/// An estimate was computed but does not meet its accuracy contract.
class EstimationFailure : public Error {
 public:
  EstimationFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// An operation produced no output (e.g. no LiDAR cell lands in the image).
class EmptyResult : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace satstereo

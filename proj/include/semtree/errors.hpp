#pragma once

#include <stdexcept>
#include <string>

namespace semtree {

// All library errors derive from Error so callers can catch one type.
// Messages are module-qualified ("corpus: ...", "router: ...") and name
// the offending record, id, or byte offset where one exists.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class RouterError : public Error {
public:
  using Error::Error;
};

// Distinguishable from other router failures so a caller can tell a slow
// scorer from a broken one.
class RouterTimeout : public RouterError {
public:
  using RouterError::RouterError;
};

} // namespace semtree

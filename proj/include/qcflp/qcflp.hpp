#pragma once

#include "qcflp/certificate.hpp"
#include "qcflp/constraint.hpp"
#include "qcflp/expr.hpp"
#include "qcflp/interval.hpp"
#include "qcflp/oracle.hpp"
#include "qcflp/prover.hpp"
#include "qcflp/qual_domain.hpp"
#include "qcflp/runtime.hpp"
#include "qcflp/solver.hpp"
#include "qcflp/statement.hpp"
#include "qcflp/syntax.hpp"
#include "qcflp/transform.hpp"

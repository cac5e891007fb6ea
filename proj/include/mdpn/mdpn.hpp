#pragma once

#include "mdpn/bitset.hpp"
#include "mdpn/dpn.hpp"
#include "mdpn/dpn_automata.hpp"
#include "mdpn/error.hpp"
#include "mdpn/exec_tree.hpp"
#include "mdpn/oracle.hpp"
#include "mdpn/query.hpp"
#include "mdpn/semantics.hpp"
#include "mdpn/transducer.hpp"
#include "mdpn/tree_automaton.hpp"

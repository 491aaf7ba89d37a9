#pragma once
// Umbrella header: the full icsmap library.

#include "icsmap/asn.hpp"
#include "icsmap/classify.hpp"
#include "icsmap/errors.hpp"
#include "icsmap/fingerprint.hpp"
#include "icsmap/pipeline.hpp"
#include "icsmap/protocol_registry.hpp"
#include "icsmap/report.hpp"
#include "icsmap/scan.hpp"
#include "icsmap/signatures.hpp"
#include "icsmap/source_client.hpp"
#include "icsmap/util.hpp"
#include "icsmap/vuln.hpp"

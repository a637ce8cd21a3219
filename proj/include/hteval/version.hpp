#pragma once

#define HTEVAL_VERSION "0.1.0"

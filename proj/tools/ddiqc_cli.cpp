// Command-line front end. Deliberately a thin shim: everything, including
// argument parsing and report assembly, lives behind the C API of the
// shared library; this file only moves text between the library and the
// process's standard streams.

#include <stdio.h>

#include "ddiqc.h"

int main(int argc, char** argv) {
    int exit_code = 0;
    ddiqc_report* report = nullptr;
    const ddiqc_status status =
        ddiqc_run_command(argc - 1, argv + 1, &exit_code, &report);
    if (status != DDIQC_OK || report == nullptr) {
        fprintf(stderr, "ddiqc: %s\n", ddiqc_last_error());
        ddiqc_report_free(report);
        return exit_code != 0 ? exit_code : 1;
    }
    const char* text = ddiqc_report_text(report);
    if (text[0] != '\0') fputs(text, stdout);
    const char* error = ddiqc_report_error(report);
    if (error[0] != '\0') fputs(error, stderr);
    ddiqc_report_free(report);
    return exit_code;
}

#include <stdio.h>
#include <string.h>

#include "cellfree.h"

#define CHECK(call)                                                  \
    do {                                                             \
        CfStatus s_ = (call);                                        \
        if (s_ != CF_STATUS_OK) {                                    \
            char msg_[256];                                          \
            cf_last_error(msg_, sizeof msg_);                        \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, msg_); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    const char *json = "{\"M\": 6, \"N\": 4, \"K\": 3, \"tau_up\": 3, \"tau_dp\": 3, \"cluster_min\": 2}";
    CfConfig *cfg = NULL;
    CfSnapshot *snap = NULL;
    CfReport *report = NULL;
    size_t m = 0, k = 0;
    double eta[18], sinr[3];

    CHECK(cf_config_from_json(json, &cfg));
    CHECK(cf_snapshot_build(cfg, 7, &snap));
    CHECK(cf_snapshot_dims(snap, &m, &k));
    if (m != 6 || k != 3) return 2;
    CHECK(cf_power_maximal_ratio(snap, cfg, CF_SCHEME_NCB, eta, 18));
    CHECK(cf_evaluate(snap, cfg, CF_SCHEME_NCB, eta, 18, &report));
    CHECK(cf_report_sinr(report, sinr, 3));
    if (cf_report_sinr(report, sinr, 2) != CF_STATUS_BUFFER_TOO_SMALL) return 3;
    printf("%s %.6e %.6e %.6e\n", cf_version(), sinr[0], sinr[1], sinr[2]);

    cf_report_free(report);
    cf_snapshot_free(snap);
    cf_config_free(cfg);
    return 0;
}

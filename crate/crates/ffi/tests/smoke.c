#include <math.h>
#include <stdio.h>
#include <string.h>
#include "rovist.h"

int main(void) {
    const char *sentences[] = {"the dog ran", "the dog ran"};
    RovistRedundancy nr;
    if (rovist_nr_score(sentences, 2, 4, &nr) != ROVIST_STATUS_OK || nr.final_score != 0.5) {
        return 1;
    }
    double x[] = {1, 2, 3}, y[] = {1, 1, 1};
    RovistCorrelation r;
    if (rovist_correlate(x, y, 3, &r) != ROVIST_STATUS_UNDEFINED) {
        return 2;
    }
    char *msg = rovist_last_error_message();
    if (msg == NULL || strlen(msg) == 0) {
        return 3;
    }
    rovist_string_free(msg);
    RovistScorer *scorer = NULL;
    if (rovist_scorer_open(NULL, NULL, NULL, NULL, 4, &scorer) != ROVIST_STATUS_OK) {
        return 4;
    }
    char *report = NULL;
    const char *story = "{\"story_id\":\"s\",\"sentences\":[\"one\",\"two\"],\"image_ids\":[]}";
    if (rovist_scorer_score_json(scorer, story, &report) != ROVIST_STATUS_OK) {
        return 5;
    }
    printf("%s\n", report);
    rovist_string_free(report);
    rovist_scorer_free(scorer);
    return fabs(rovist_scale_score(0.0)) == 0.0 ? 0 : 6;
}

#!/usr/bin/env python3
"""Regenerate the bundled 20-sample fixture (tests/fixtures/hotpot_tiny.json).

The records use the HotpotQA distractor schema (_id, answer, question,
context, supporting_facts) over an invented mini-world, so the fixture is
self-contained and license-free. Every answer appears verbatim inside a
supporting-fact sentence, titles are unique per record, and no answer is
yes/no — all 20 records survive preprocessing.
"""

import json
import pathlib

FIXTURE = pathlib.Path(__file__).resolve().parent.parent / "crates" / "kcs" / "tests" / "fixtures" / "hotpot_tiny.json"


def artisan(i, person, craft, workshop, year, town, region, feature, pavilion, fest):
    """Bridge: person -> hometown; answer is the region of the town."""
    return {
        "_id": f"fx{i:02d}",
        "question": f"In which region is the hometown of the founder of the {workshop}?",
        "answer": region,
        "context": [
            [person, [
                f"{person} is a {craft} from the town of {town}.",
                f"In {year} {person} founded the {workshop}.",
                f"Works from the {workshop} are shown at the {pavilion}.",
            ]],
            [town, [
                f"{town} is a small town in the {region}.",
                f"The town is known for its {feature}.",
                f"{town} hosts the {fest} every autumn.",
            ]],
            [pavilion, [
                f"The {pavilion} is an exhibition hall with a glass roof.",
                f"It stages a winter fair each year.",
            ]],
            [fest, [
                f"The {fest} is a street festival of lanterns and music.",
                f"Visitors arrive from villages across the coast.",
            ]],
        ],
        "supporting_facts": [[person, 0], [town, 0]],
    }


def band(i, group, city, genre, album, year, label, label_city, venue, rival):
    """Chain of three: band -> album -> label; answer is the label's city."""
    return {
        "_id": f"fx{i:02d}",
        "question": f"In which city is the label that released the album {album} based?",
        "answer": label_city,
        "context": [
            [group, [
                f"{group} is a {genre} band formed in {city}.",
                f"The band released the album {album} in {year}.",
                f"{group} first played at the {venue}.",
            ]],
            [album, [
                f"{album} is a studio album by {group}.",
                f"The album was released by {label}.",
                f"Critics compared it to early work by {rival}.",
            ]],
            [label, [
                f"{label} is an independent record label based in {label_city}.",
                f"The label was started by two radio engineers.",
            ]],
            [rival, [
                f"{rival} is a band known for long instrumental sets.",
                f"The group disbanded after three tours.",
            ]],
            [venue, [
                f"The {venue} is a concert hall with a timber stage.",
            ]],
        ],
        "supporting_facts": [[group, 1], [album, 1], [label, 0]],
    }


def river(i, stream, length, valley, peak, range_, town, bridge, lake):
    """Bridge: river -> source peak; answer is the mountain range."""
    return {
        "_id": f"fx{i:02d}",
        "question": f"The source of the {stream} lies in which mountain range?",
        "answer": range_,
        "context": [
            [stream, [
                f"The {stream} is a {length}-kilometre river in the {valley}.",
                f"The river rises on the slopes of {peak}.",
                f"It passes the town of {town} before reaching {lake}.",
            ]],
            [peak, [
                f"{peak} is the highest summit of the {range_}.",
                f"A stone shelter stands below its north face.",
            ]],
            [town, [
                f"{town} is a market town on the {stream}.",
                f"The {bridge} crosses the river at its centre.",
            ]],
            [lake, [
                f"{lake} is a cold freshwater lake rich in trout.",
            ]],
        ],
        "supporting_facts": [[stream, 1], [peak, 0]],
    }


def comet(i, comet_name, astronomer, obs, mountain, period, year, society, city):
    """Chain of three: comet -> discoverer -> observatory; answer is the mountain."""
    return {
        "_id": f"fx{i:02d}",
        "question": f"On which mountain does the observatory where {comet_name} was discovered stand?",
        "answer": mountain,
        "context": [
            [comet_name, [
                f"{comet_name} is a periodic comet with an orbit of {period} years.",
                f"It was discovered in {year} by {astronomer}.",
            ]],
            [astronomer, [
                f"{astronomer} is an astronomer and a fellow of the {society}.",
                f"{astronomer} worked at the {obs} for two decades.",
            ]],
            [obs, [
                f"The {obs} is a research station on {mountain}.",
                f"Its main reflector has a two-metre mirror.",
            ]],
            [society, [
                f"The {society} is a learned society seated in {city}.",
                f"It publishes a quarterly bulletin.",
            ]],
        ],
        "supporting_facts": [[comet_name, 1], [astronomer, 1], [obs, 0]],
    }


def festival(i, fest, city, month, dish, market, river_name, founder, year):
    """Bridge: festival -> host city; answer is the local dish, mid-document."""
    return {
        "_id": f"fx{i:02d}",
        "question": f"Which dish is served at the market square during the {fest}?",
        "answer": dish,
        "context": [
            [fest, [
                f"The {fest} is held each {month} in {city}.",
                f"It was first organised by {founder} in {year}.",
            ]],
            [city, [
                f"{city} is a port city at the mouth of the {river_name}.",
                f"During the {fest} stalls on the {market} serve {dish} to visitors.",
                f"The city grew around a medieval shipyard.",
            ]],
            [founder, [
                f"{founder} was a choirmaster and a keen rower.",
            ]],
            [river_name, [
                f"The {river_name} is a tidal river with shifting sandbars.",
                f"Ferries cross it on the hour.",
            ]],
        ],
        "supporting_facts": [[fest, 0], [city, 1]],
    }


RECORDS = [
    artisan(0, "Mira Vell", "glassblower", "Vell Atelier", 1963, "Arden Hollow",
            "Quoren Valley", "mirror-still lake", "Calder Pavilion", "Lantern Route"),
    artisan(1, "Tomas Brack", "potter", "Brack Kilnworks", 1951, "Felder Reach",
            "Saltmarsh Flats", "white clay pits", "Harrow Gallery", "Ember Parade"),
    artisan(2, "Ines Calloway", "weaver", "Calloway Loomhouse", 1978, "Nettle Cross",
            "Bellow Highlands", "terraced gardens", "Senna Pavilion", "Wool Fair"),
    artisan(3, "Odo Fenwick", "luthier", "Fenwick Workshop", 1949, "Quill Harbour",
            "Grey Cape", "singing cliffs", "Tide Hall", "Gull Regatta"),
    band(4, "The Vantage Collective", "Corvel", "post-rock", "Static Meridian", 2004,
         "Halcyon Records", "Drossel", "Arc Theatre", "Field Harmonics"),
    band(5, "Paper Compass", "Ostreve", "folk", "Cartographer's Lament", 1997,
         "Tern Song Records", "Vael Junction", "Copper Rooms", "The Low Tide Club"),
    band(6, "Neon Orchard", "Brassfell", "synth-pop", "Glasshouse Summer", 2011,
         "Looplight Records", "Mirren Bay", "Echo Pavilion", "Velvet Antenna"),
    band(7, "Quiet Meridian", "Sundholm", "ambient", "Northern Interval", 2008,
         "Auric Tape Works", "Kessel Point", "Stone Foyer", "Glass Harbour Trio"),
    river(8, "Veldra River", 210, "Quorensal Basin", "Mount Serrel", "Serrel Range",
          "Farrow Bend", "Ninespan Bridge", "Lake Onnela"),
    river(9, "Tarn Water", 88, "Elm Vale", "Howe Crag", "Cinder Fells",
          "Mossgate", "Pack Bridge", "Lake Virel"),
    river(10, "Ashwick Beck", 47, "Dunmere Vale", "Raven Tor", "Harrow Moors",
          "Cobble Ford", "Tanners Bridge", "Gull Mere"),
    river(11, "Corliss River", 330, "Vast Levels", "Pike Sentinel", "Windward Spine",
          "Old Weir", "Chain Bridge", "Smelt Lagoon"),
    comet(12, "Comet Ardenne-Vey", "Lida Ardenne", "Vey Observatory", "Mount Corvess",
          11, 1968, "Meridian Circle Society", "Ostreve"),
    comet(13, "Comet Halvorsen", "Piet Halvorsen", "Skylark Station", "Bren Peak",
          26, 1982, "Austral Sky Union", "Port Vanna"),
    comet(14, "Comet Quayle-Moss", "Edda Quayle", "Candle Ridge Observatory", "Hollow Spire",
          7, 1995, "Northern Transit Society", "Drossel"),
    comet(15, "Comet Verano", "Sol Verano", "Palisade Dome", "Cerro Lumen",
          41, 1977, "Equatorial Survey League", "Mirren Bay"),
    festival(16, "Lantern Moor Festival", "Gravenport", "October", "smoked eel pie",
             "Beacon Market", "Dour Water", "Abel Strand", 1921),
    festival(17, "Copper Kite Days", "Vael Junction", "March", "saffron dumplings",
             "Spindle Market", "Rill Channel", "Marta Quill", 1948),
    festival(18, "Frostvine Carnival", "Kessel Point", "January", "juniper flatbread",
             "Anchor Market", "Pale Sound", "Corin Ashe", 1907),
    festival(19, "Gull Wharf Fair", "Port Vanna", "June", "barley cream buns",
             "Rope Walk Market", "Vanna Sound", "Hesper Cole", 1933),
]


def validate(records):
    assert len(records) == 20
    seen_ids = set()
    for rec in records:
        assert rec["_id"] not in seen_ids
        seen_ids.add(rec["_id"])
        assert rec["answer"].lower() not in ("yes", "no")
        titles = [title for title, _ in rec["context"]]
        assert len(titles) == len(set(titles)), rec["_id"]
        by_title = dict(rec["context"])
        answer_found = False
        for title, idx in rec["supporting_facts"]:
            assert title in by_title, (rec["_id"], title)
            assert idx < len(by_title[title]), (rec["_id"], title, idx)
            if rec["answer"].lower() in by_title[title][idx].lower():
                answer_found = True
        assert answer_found, rec["_id"]


def main():
    validate(RECORDS)
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    with open(FIXTURE, "w") as f:
        json.dump(RECORDS, f, indent=1, ensure_ascii=False)
        f.write("\n")
    print(f"wrote {len(RECORDS)} records -> {FIXTURE}")


if __name__ == "__main__":
    main()

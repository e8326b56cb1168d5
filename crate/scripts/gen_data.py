#!/usr/bin/env python3
"""Regenerates the bundled fixture database and mini-corpus.

Output goes to crates/core/data/. The generator is seeded, so running it
twice produces identical files. The user-side phrasing mirrors the
simulator's template NLG so that models trained on the corpus can talk to
the simulator.
"""
import json
import os
import random

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "crates", "core", "data")
rng = random.Random(20201)

AREAS = ["north", "south", "center", "east", "west"]
PRICES = ["cheap", "moderate", "expensive"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


def phone():
    return "01223" + "".join(rng.choice("0123456789") for _ in range(6))


def postcode():
    return "cb" + str(rng.randint(1, 9)) + str(rng.randint(1, 9)) + rng.choice("abcdefghjk") + rng.choice("pqrstuvwxy")


STREETS = ["regent street", "hills road", "mill road", "bridge street", "king street", "trumpington street",
           "newmarket road", "chesterton road", "huntingdon road", "histon road", "lensfield road", "market hill"]


def address():
    return f"{rng.randint(1, 98)} {rng.choice(STREETS)}"


def restaurants():
    foods = ["chinese", "italian", "indian", "british", "european", "modern european", "thai", "japanese",
             "french", "gastropub", "mediterranean", "korean", "spanish", "turkish", "vietnamese"]
    names = ["golden wok", "pizza hut city centre", "curry garden", "the cambridge chop house", "eraina",
             "riverside brasserie", "bangkok city", "wagamama", "cote", "the slug and lettuce",
             "la mimosa", "little seoul", "la tasca", "anatolia", "thanh binh", "jinling noodle bar",
             "da vinci pizzeria", "the gandhi", "midsummer house restaurant", "the copper kettle",
             "sala thong", "yu garden", "clowns cafe", "meghna"]
    out = []
    for i, name in enumerate(names):
        out.append({
            "name": name,
            "area": AREAS[i % 5],
            "food": foods[i % len(foods)],
            "pricerange": PRICES[(i // 2) % 3],
            "phone": phone(),
            "address": address(),
            "postcode": postcode(),
        })
    # the booking fixture restaurant comes first among center/british/moderate
    return out


def hotels():
    east_names = ["allenbell", "autumn house", "a and b guest house", "carolina bed and breakfast",
                  "leverton house", "warkworth house", "rosas bed and breakfast lodge", "acorn lodge",
                  "bridge lodge", "churchill lodge", "dover house", "elm lodge", "fen house", "glebe lodge",
                  "hawthorn house", "ivy lodge", "juniper house", "kestrel lodge", "laurel house",
                  "maple lodge", "nutmeg house", "oak lodge", "poplar house", "quince lodge", "rowan house",
                  "sorrel lodge", "thistle house", "umber lodge", "violet house", "willow lodge",
                  "yarrow house", "zinnia lodge", "birch house"]
    assert len(east_names) == 33
    other = [("ashley hotel", "north", "hotel", "moderate"), ("lovell lodge", "north", "hotel", "moderate"),
             ("alpha-milton guest house", "north", "guesthouse", "moderate"),
             ("worth house", "north", "guesthouse", "cheap"),
             ("aylesbray lodge guest house", "south", "guesthouse", "moderate"),
             ("the lensfield hotel", "south", "hotel", "expensive"),
             ("bridge guest house", "south", "guesthouse", "moderate"),
             ("gonville hotel", "center", "hotel", "expensive"), ("el shaddai", "center", "guesthouse", "cheap"),
             ("university arms hotel", "center", "hotel", "expensive"),
             ("cityroomz", "center", "hotel", "moderate"),
             ("finches bed and breakfast", "west", "guesthouse", "cheap"),
             ("hobsons house", "west", "guesthouse", "moderate"),
             ("the cambridge belfry", "west", "hotel", "cheap"),
             ("huntingdon marriott hotel", "west", "hotel", "expensive"),
             ("express by holiday inn cambridge", "east", "hotel", "expensive")]
    out = []
    for name, area, typ, price in other:
        out.append({"name": name, "type": typ, "area": area, "pricerange": price,
                    "stars": str(rng.choice([2, 3, 4])), "parking": rng.choice(["yes", "no"]),
                    "internet": rng.choice(["yes", "no"]), "phone": phone(), "address": address(),
                    "postcode": postcode()})
    # keep the east hotel out of the east-guesthouse block so area=east counts 33 guesthouses
    out = [r for r in out if r["area"] != "east"]
    for i, name in enumerate(east_names):
        out.append({"name": name, "type": "guesthouse", "area": "east", "pricerange": PRICES[i % 2],
                    "stars": str(rng.choice([3, 4])), "parking": rng.choice(["yes", "no"]),
                    "internet": "yes", "phone": phone(), "address": address(), "postcode": postcode()})
    return out


def attractions():
    rows = [("abbey pool and astroturf pitch", "swimmingpool", "north", "2 pounds"),
            ("byard art", "museum", "south", "free"),
            ("kings college", "college", "center", "free"),
            ("cambridge museum of technology", "museum", "east", "5 pounds"),
            ("churchill college", "college", "west", "free"),
            ("milton country park", "park", "north", "free"),
            ("sheeps green and lammas land park fen causeway", "park", "south", "free"),
            ("the fitzwilliam museum", "museum", "center", "free"),
            ("adc theatre", "theatre", "center", "3 pounds"),
            ("great saint marys church", "architecture", "center", "2 pounds"),
            ("cherry hinton water play", "park", "east", "free"),
            ("kettles yard", "museum", "west", "free"),
            ("riverboat georgina", "boat", "north", "4 pounds"),
            ("tenpin", "entertainment", "south", "3 pounds"),
            ("ballare", "nightclub", "center", "5 pounds"),
            ("parkside pools", "swimmingpool", "center", "2 pounds"),
            ("whipple museum of the history of science", "museum", "center", "free"),
            ("jesus green outdoor pool", "swimmingpool", "north", "2 pounds"),
            ("funky fun house", "entertainment", "east", "4 pounds"),
            ("magdalene college", "college", "west", "free")]
    return [{"name": n, "type": t, "area": a, "price": p, "phone": phone(), "address": address(),
             "postcode": postcode()} for n, t, a, p in rows]


def trains():
    others = ["peterborough", "london kings cross", "ely", "norwich", "stansted airport", "stevenage"]
    out = [{"id": "tr5933", "departure": "peterborough", "destination": "cambridge", "day": "tuesday",
            "leave": "15:19", "arrive": "16:09", "price": "33 pounds", "duration": "50 minutes"}]
    used = {"tr5933"}
    for other in others:
        for dep, dst in [(other, "cambridge"), ("cambridge", other)]:
            for day in DAYS:
                for hour in (9, 17):
                    tid = "tr" + str(rng.randint(1000, 9999))
                    while tid in used:
                        tid = "tr" + str(rng.randint(1000, 9999))
                    used.add(tid)
                    minute = rng.choice([1, 11, 19, 24, 34, 40, 50])
                    dur = rng.choice([38, 50, 79, 88])
                    end = hour * 60 + minute + dur
                    out.append({"id": tid, "departure": dep, "destination": dst, "day": day,
                                "leave": f"{hour:02d}:{minute:02d}",
                                "arrive": f"{end // 60:02d}:{end % 60:02d}",
                                "price": f"{rng.choice([10, 16, 23, 33])} pounds",
                                "duration": f"{dur} minutes"})
    return out


DB = {"restaurant": restaurants(), "hotel": hotels(), "attraction": attractions(), "train": trains()}

# ---- user NLG (mirrors the simulator) ----
INTRO = {"hotel": "i want a place to stay", "restaurant": "i am looking for a restaurant",
         "attraction": "i would like to find someplace to visit", "train": "i need a train",
         "taxi": "i need a taxi"}
PHRASE = {"area": "in the {}", "pricerange": "with a {} price range", "food": "serving {} food",
          "type": "that is a {}", "stars": "with {} stars", "name": "called {}", "departure": "leaving from {}",
          "destination": "going to {}", "day": "on {}", "leave": "leaving after {}", "arrive": "arriving by {}",
          "people": "for {} people", "time": "at {}", "stay": "for {} nights"}
REQ_NAME = {"phone": "phone number", "address": "address", "postcode": "postcode", "price": "price",
            "leave": "departure time", "arrive": "arrival time"}
INFORMABLE = {"restaurant": ["food", "area", "pricerange"], "hotel": ["area", "pricerange", "type", "stars"],
              "attraction": ["area", "type"], "train": ["departure", "destination", "day"]}
REQUESTABLE = {"restaurant": ["phone", "address", "postcode"], "hotel": ["phone", "address", "postcode"],
               "attraction": ["phone", "address", "postcode", "price"],
               "train": ["price", "arrive", "leave"]}
BOOKING = {"restaurant": ["people", "day", "time"], "hotel": ["people", "day", "stay"], "train": ["people"]}
QUESTION = {"area": "what area of town would you like ?", "pricerange": "do you have a price range ?",
            "food": "what type of food would you like ?", "type": "what type of place are you looking for ?",
            "day": "what day would you like to travel ?", "destination": "where are you going to ?"}
ALIASES = {"departure": "pickup_location", "destination": "dropoff_location", "leave": "leaveat",
           "pricerange": "price_range", "people": "book_people"}
SLOT_ORDER = ["name", "id", "type", "area", "pricerange", "food", "stars", "parking", "internet", "departure",
              "destination", "leave", "arrive", "day", "time", "stay", "people"]
DOMAIN_ORDER = ["restaurant", "hotel", "attraction", "train", "taxi", "police", "hospital", "general"]


def matches(domain, cons):
    return [r for r in DB[domain] if all(r.get(k) == v for k, v in cons.items())]


def belief_str(belief, use_alias=False, colon=False):
    parts = []
    for d in DOMAIN_ORDER:
        if d not in belief or not belief[d]:
            continue
        pairs = []
        for s in sorted(belief[d], key=lambda s: (SLOT_ORDER.index(s) if s in SLOT_ORDER else 99, s)):
            name = ALIASES.get(s, s) if use_alias else s
            pairs.append(f"{name} {':' if colon else '='} {belief[d][s]}")
        parts.append(d + " { " + " , ".join(pairs) + " }")
    return " ".join(parts)


def ref():
    while True:
        r = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(8))
        if any(c.isdigit() for c in r) and any(c.isalpha() for c in r):
            return r


def make_goal(domain):
    rec = rng.choice(DB[domain])
    k = rng.randint(2, len(INFORMABLE[domain])) if domain != "train" else 3
    slots = INFORMABLE[domain][:] if domain == "train" else rng.sample(INFORMABLE[domain], k)
    informs = {s: rec[s] for s in slots}
    reqs = rng.sample(REQUESTABLE[domain], rng.randint(1, 2))
    book = None
    if domain in BOOKING and rng.random() < 0.6:
        book = {}
        for s in BOOKING[domain]:
            if s == "people":
                book[s] = str(rng.randint(1, 6))
            elif s == "day":
                book[s] = rng.choice(DAYS)
            elif s == "time":
                book[s] = rng.choice(["11:30", "12:00", "13:00", "18:45", "19:30"])
            elif s == "stay":
                book[s] = str(rng.randint(1, 4))
    return {"domain": domain, "informs": informs, "reqs": reqs, "book": book}


def say_system(text):
    return {"speaker": "system", "text": text}


def dialog_for(goals, did):
    events = []
    belief = {}
    if rng.random() < 0.2:
        events.append(say_system("hello , how can i help you today ?"))
    for gi, goal in enumerate(goals):
        d = goal["domain"]
        informs = list(goal["informs"].items())
        rng.shuffle(informs)
        first = informs[:2]
        rest = informs[2:]
        belief.setdefault(d, {})
        # maybe let the system ask for one slot instead of the user volunteering it
        asked = None
        if len(first) == 2 and rng.random() < 0.4 and first[1][0] in QUESTION:
            asked = first[1]
            first = first[:1]
        text = INTRO[d] + " " + " ".join(PHRASE[s].format(v) for s, v in first) + " ."
        if gi == 0 and rng.random() < 0.25:
            events.append({"speaker": "user", "text": INTRO[d].capitalize() + "."})
            text = " ".join(PHRASE[s].format(v) for s, v in first) + " ."
            events.append({"speaker": "user", "text": text})
        else:
            events.append({"speaker": "user", "text": text})
        for s, v in first:
            belief[d][s] = v
        if asked:
            events.append(dict(say_system(QUESTION[asked[0]]), belief=belief_str(belief, colon=rng.random() < 0.2)))
            events.append({"speaker": "user", "text": PHRASE[asked[0]].format(asked[1]) + " ."})
            belief[d][asked[0]] = asked[1]
        if rest:
            m = matches(d, belief[d])
            key = "id" if d == "train" else "name"
            events.append(dict(say_system(f"there are {len(m)} options . do you have any other preference ?"),
                               belief=belief_str(belief)))
            events.append({"speaker": "user",
                           "text": "i would also like it " + " ".join(PHRASE[s].format(v) for s, v in rest) + " ."})
            for s, v in rest:
                belief[d][s] = v
        m = matches(d, belief[d])
        rec = m[0]
        key = "id" if d == "train" else "name"
        offer = rng.choice(["{k} is a good choice .", "how about {k} ? it is in the {a} .",
                            "i recommend {k} ."])
        if d == "train":
            offer = rng.choice(["{k} is a good choice .", "{k} leaves at {l} and arrives by {r} ."])
        events.append(dict(say_system(offer.format(k=rec[key], a=rec.get("area", ""), l=rec.get("leave", ""),
                                                   r=rec.get("arrive", ""))), belief=belief_str(belief)))
        events.append({"speaker": "user",
                       "text": "what is the " + " and the ".join(REQ_NAME[r] for r in goal["reqs"]) + " ?"})
        answer = " and ".join(f"the {REQ_NAME[r]} is {rec[r]}" for r in goal["reqs"]) + " ."
        events.append(dict(say_system(answer), belief=belief_str(belief)))
        if goal["book"]:
            events.append({"speaker": "user", "text": "can you book it " +
                           " ".join(PHRASE[s].format(v) for s, v in goal["book"].items()) + " ?"})
            for s, v in goal["book"].items():
                belief[d][s] = v
            r = ref()
            msg = rng.choice([f"i have booked it for you . your reference number is {r} .",
                              f"booking was successful . the reference number is {r} ."])
            events.append(dict(say_system(msg), belief=belief_str(belief)))
    events.append({"speaker": "user", "text": "thank you , goodbye ."})
    events.append(dict(say_system("you are welcome . goodbye ."), belief=belief_str(belief)))
    if rng.random() < 0.15:
        events.append({"speaker": "user", "text": "bye"})
    return {"id": f"mini-{did:03d}", "events": events}


PLACES = ["the fitzwilliam museum", "kings college", "golden wok", "ashley hotel", "byard art", "wagamama",
          "cambridge museum of technology", "gonville hotel"]


def taxi_dialog(did):
    dep, dst = rng.sample(PLACES, 2)
    leave = rng.choice(["09:15", "10:30", "14:45", "17:00"])
    belief = {"taxi": {"departure": dep, "destination": dst}}
    ev = [{"speaker": "user", "text": f"i need a taxi leaving from {dep} going to {dst} ."},
          dict(say_system("what time would you like to leave ?"), belief=belief_str(belief, use_alias=True))]
    belief["taxi"]["leave"] = leave
    ev.append({"speaker": "user", "text": f"leaving after {leave} ."})
    car = rng.choice(["black toyota", "white skoda", "red volvo", "blue honda"])
    ev.append(dict(say_system(f"i have booked a {car} for you . it will pick you up at {leave} ."),
                   belief=belief_str(belief, use_alias=True)))
    ev.append({"speaker": "user", "text": "thank you , goodbye ."})
    ev.append(dict(say_system("you are welcome . goodbye ."), belief=belief_str(belief, use_alias=True)))
    return {"id": f"mini-{did:03d}", "events": ev}


def main():
    os.makedirs(os.path.join(ROOT, "db"), exist_ok=True)
    for d, rows in DB.items():
        with open(os.path.join(ROOT, "db", f"{d}.json"), "w") as f:
            json.dump(rows, f, indent=1)
            f.write("\n")
    dialogs = []
    plan = (["restaurant"] * 10 + ["hotel"] * 10 + ["attraction"] * 8 + ["train"] * 9 + ["taxi"] * 5
            + [("hotel", "train")] * 3 + [("restaurant", "attraction")] * 3 + [("attraction", "hotel")] * 2)
    for i, p in enumerate(plan):
        if p == "taxi":
            dialogs.append(taxi_dialog(i))
        else:
            doms = p if isinstance(p, tuple) else (p,)
            dialogs.append(dialog_for([make_goal(d) for d in doms], i))
    with open(os.path.join(ROOT, "corpus.jsonl"), "w") as f:
        for d in dialogs:
            f.write(json.dumps(d) + "\n")
    print(len(dialogs), "dialogs;", {d: len(r) for d, r in DB.items()})


if __name__ == "__main__":
    main()

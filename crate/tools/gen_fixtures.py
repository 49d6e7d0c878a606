#!/usr/bin/env python3
"""Generate the synthetic fixture corpus and its expected outputs.

The expected graphs are computed directly from the record dictionaries by
instantiating each rule's template by hand (no JSON-LD processing, no join
engine), so they serve as an independent oracle for the Rust pipeline.
Run from the repository root; outputs are committed and then frozen.
"""

import datetime as dt
import json
import random
from pathlib import Path
from urllib.parse import quote

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

BASE = "https://ditrare.ise.fiz-karlsruhe.de/chemotion-kg/"
NODES = BASE + "nodes/"
SCHEMA = "http://schema.org/"
NFDI = "https://nfdi.fiz-karlsruhe.de/ontology/"
OBO = "http://purl.obolibrary.org/obo/"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
XSD = "http://www.w3.org/2001/XMLSchema#"
EX = "https://repository.example.org/"

PUBLISHER = {"@id": EX, "@type": "Organization", "name": "Synthetic Chemistry Repository"}
CATALOG = {"@id": EX + "catalog", "@type": "DataCatalog", "name": "Synthetic Chemistry Repository"}
LICENSE = "https://creativecommons.org/licenses/by-sa/4.0/"
STANDARD = "https://bioschemas.org/profiles/Study/0.3-DRAFT"
TECHNIQUES = {
    "Raman": "Raman spectroscopy",
    "1H NMR": "1H nuclear magnetic resonance spectroscopy",
    "13C NMR": "13C nuclear magnetic resonance spectroscopy",
    "IR": "infrared spectroscopy",
    "MS": "mass spectrometry",
}
CREATORS = [
    ("https://orcid.example.org/0000-0001-0000-000%d" % i, name)
    for i, name in enumerate(
        ["Ada Example", "Bo Sample", "Cy Placeholder", "Dee Fixture",
         "Eli Synthetic", "Fay Testcase", "Gus Mockridge", "Hal Stubbs"], 1)
]
SAMPLE_KEY = "VRYFQVRFMNXTJS-UHFFFAOYSA-N"


def enc(s):
    return quote(s, safe="")


def node(lexical):
    return NODES + enc(lexical)


def iri(v):
    return ("iri", v)


def lit(v, dt_=XSD + "string"):
    return ("lit", v, dt_)


def record_iri(date, source_id):
    stem, suffix = source_id.rsplit("/", 1)
    return f"{BASE}resources/{date.year:04}/{date.month:02}/{stem}/{enc(suffix)}"


def graph_iri(date):
    return f"{BASE}graphs/{date.year:04}/{date.month:02}"


# ---------------------------------------------------------------- corpus ---

def compounds(rng):
    out = []
    for i in range(30):
        if i == 0:
            key = SAMPLE_KEY
        else:
            key = "".join(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") for _ in range(14)) + "-" + \
                  "".join(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") for _ in range(10)) + "-N"
        k = i + 1
        if i % 2:
            smiles, formula = "C" * k + "O", f"C{k}H{2 * k + 2}O"
            weight = 12.011 * k + 1.008 * (2 * k + 2) + 15.999
        else:
            smiles, formula = "C" * k + "(=O)O", f"C{k + 1}H{2 * k + 2}O2"
            weight = 12.011 * (k + 1) + 1.008 * (2 * k + 2) + 2 * 15.999
        date = dt.date(2014, 5, 17) if i == 0 else dt.date(2014, 6, 3) + dt.timedelta(days=19 * i)
        out.append({
            "key": key, "smiles": smiles, "formula": formula,
            "weight": round(weight, 2), "date": date,
            "image": None if i % 10 == 9 else f"{EX}images/{key}.svg",
        })
    return out


def payload(c, suffix, creators):
    key = c["key"]
    molecule = {
        "@id": f"{EX}molecule/{key}",
        "@type": "MolecularEntity",
        "inChIKey": key,
        "smiles": c["smiles"],
        "molecularFormula": c["formula"],
        "molecularWeight": {"@type": "QuantitativeValue", "value": c["weight"], "unitText": "g/mol"},
    }
    if c["image"]:
        molecule["image"] = c["image"]
    return {
        "@context": "https://schema.org/",
        "@type": "Dataset",
        "name": f"{suffix} data of {c['formula']}",
        "description": f"Synthetic {TECHNIQUES[suffix]} measurement of compound {key}.",
        "identifier": f"10.14272/{key}/{suffix}",
        "url": f"{EX}inchikey/{key}/{suffix}",
        "license": LICENSE,
        "measurementTechnique": TECHNIQUES[suffix],
        "creator": [{"@id": cid, "@type": "Person", "name": name} for cid, name in creators],
        "publisher": PUBLISHER,
        "includedInDataCatalog": CATALOG,
        "isPartOf": {
            "@id": f"{EX}study/{key}",
            "@type": "Study",
            "datePublished": c["date"].isoformat(),
            "schemaVersion": STANDARD,
            "publisher": PUBLISHER,
            "about": {
                "@id": f"{EX}substance/{key}",
                "@type": "ChemicalSubstance",
                "name": c["formula"],
                "hasBioChemEntityPart": molecule,
            },
        },
    }


def corpus():
    rng = random.Random(20140517)
    comps = compounds(rng)
    doubles = set(rng.sample(range(1, 30), 20))
    records = []
    for i, c in enumerate(comps):
        suffixes = ["Raman"] if i == 0 else rng.sample(sorted(TECHNIQUES), 2 if i in doubles else 1)
        for suffix in suffixes:
            creators = rng.sample(CREATORS, rng.randint(1, 3))
            records.append({
                "source_id": f"10.14272/{c['key']}/{suffix}",
                "submission_date": c["date"].isoformat(),
                "payload": payload(c, suffix, creators),
            })
    assert len(records) == 50
    return records


# ---------------------------------------------------------------- oracle ---

def rule_outputs(source_id, date, p):
    """Per-rule triples for one record, by direct template instantiation."""
    d = record_iri(date, source_id)
    study = p["isPartOf"]
    substance = study["about"]
    mol = substance["hasBioChemEntityPart"]
    out = {k: set() for k in ["creator", "dataset", "study", "substance", "substance_image"]}

    t = out["dataset"]
    for c in p["creator"]:
        t |= {
            (d, RDF_TYPE, iri(NFDI + "NFDI_0000009")),
            (d, NFDI + "NFDI_0001027", iri(c["@id"])),
            (d, NFDI + "NFDI_0000191", iri(p["publisher"]["@id"])),
            (d, OBO + "IAO_0000235", iri(node(p["description"]))),
            (d, NFDI + "NFDI_0001006", iri(node(p["identifier"]))),
            (d, NFDI + "NFDI_0000142", iri(p["license"])),
            (d, NFDI + "NFDI_0000216", lit(p["measurementTechnique"])),
            (d, OBO + "IAO_0000235", iri(node(p["name"]))),
            (d, OBO + "IAO_0000235", iri(node(p["url"]))),
            (d, NFDI + "NFDI_0001023", iri(study["@id"])),
            (d, OBO + "BFO_0000178", iri(p["includedInDataCatalog"]["@id"])),
        }

    t = out["creator"]
    for c in p["creator"]:
        role = study["@id"] + "/creator-role/" + enc(c["@id"])
        t |= {
            (c["@id"], RDF_TYPE, iri(NFDI + "NFDI_0000004")),
            (c["@id"], OBO + "IAO_0000235", iri(node(c["name"]))),
            (node(c["name"]), RDFS_LABEL, lit(c["name"])),
            (c["@id"], OBO + "BFO_0000053", iri(role)),
            (role, RDF_TYPE, iri(OBO + "BFO_0000023")),
            (study["@id"], OBO + "BFO_0000057", iri(c["@id"])),
            (study["@id"], OBO + "BFO_0000055", iri(role)),
        }

    s = study["@id"]
    pub = s + "/publishing"
    prole = pub + "/publisher-role"
    period = node(study["datePublished"])
    out["study"] |= {
        (s, RDF_TYPE, iri(OBO + "BFO_0000015")),
        (s, NFDI + "NFDI_0000207", iri(study["schemaVersion"])),
        (s, OBO + "BFO_0000117", iri(pub)),
        (pub, RDF_TYPE, iri(NFDI + "NFDI_0000014")),
        (pub, OBO + "BFO_0000199", iri(period)),
        (pub, OBO + "BFO_0000057", iri(study["publisher"]["@id"])),
        (pub, OBO + "BFO_0000055", iri(prole)),
        (period, RDF_TYPE, iri(OBO + "BFO_0000008")),
        (period, RDFS_LABEL, lit(study["datePublished"])),
        (study["publisher"]["@id"], RDF_TYPE, iri(NFDI + "NFDI_0000003")),
        (study["publisher"]["@id"], OBO + "BFO_0000053", iri(prole)),
        (prole, RDF_TYPE, iri(OBO + "BFO_0000023")),
    }

    m = mol["@id"]
    weight = m + "/molecular-weight"
    datum = weight + "/datum"
    mw = mol["molecularWeight"]
    unit = node(mw["unitText"])
    out["substance"] |= {
        (s, OBO + "BFO_0000057", iri(substance["@id"])),
        (substance["@id"], RDF_TYPE, iri(OBO + "CHEBI_59999")),
        (substance["@id"], OBO + "BFO_0000178", iri(m)),
        (m, RDF_TYPE, iri(OBO + "CHEBI_23367")),
        (m, OBO + "IAO_0000235", iri(node(mol["inChIKey"]))),
        (m, OBO + "IAO_0000235", iri(node(mol["smiles"]))),
        (m, OBO + "IAO_0000235", iri(node(mol["molecularFormula"]))),
        (node(mol["inChIKey"]), RDFS_LABEL, lit(mol["inChIKey"])),
        (node(mol["smiles"]), RDFS_LABEL, lit(mol["smiles"])),
        (node(mol["molecularFormula"]), RDFS_LABEL, lit(mol["molecularFormula"])),
        (m, OBO + "BFO_0000053", iri(weight)),
        (weight, RDF_TYPE, iri(OBO + "BFO_0000019")),
        (datum, RDF_TYPE, iri(OBO + "IAO_0000109")),
        (datum, OBO + "IAO_0000221", iri(weight)),
        (datum, OBO + "IAO_0000039", iri(unit)),
        (datum, OBO + "IAO_0000004", lit(repr(mw["value"]), XSD + "decimal")),
        (unit, RDF_TYPE, iri(OBO + "IAO_0000003")),
        (unit, RDFS_LABEL, lit(mw["unitText"])),
    }

    if "image" in mol:
        img = node(mol["image"])
        out["substance_image"] |= {
            (m, OBO + "IAO_0000235", iri(img)),
            (img, RDF_TYPE, iri(NFDI + "NFDI_0000223")),
            (img, RDFS_LABEL, lit(mol["image"])),
        }
    return out


def term_key(t):
    if t[0] == "iri":
        return (1, t[1], "", "")
    return (2, t[1], t[2], "")


def nt_term(t):
    if t[0] == "iri":
        return f"<{t[1]}>"
    lex = t[1].replace("\\", "\\\\").replace('"', '\\"')
    return f'"{lex}"' if t[2] == XSD + "string" else f'"{lex}"^^<{t[2]}>'


def nt_line(tr, graph=None):
    s, p, o = tr
    g = f" <{graph}>" if graph else ""
    return f"<{s}> <{p}> {nt_term(o)}{g} .\n"


def sort_triples(ts):
    return sorted(ts, key=lambda t: ((1, t[0]), (1, t[1]), term_key(t[2])))


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ------------------------------------------------------------- fixtures ---

def dataset_rule():
    """A record carrying exactly the properties the dataset rule's WHERE block reads."""
    date = dt.date(2014, 5, 17)
    source_id = f"10.14272/{SAMPLE_KEY}/Raman"
    d = record_iri(date, source_id)
    p = {
        "@context": "https://schema.org/",
        "@id": d,
        "@type": "Dataset",
        "creator": {"@id": CREATORS[0][0]},
        "publisher": {"@id": EX},
        "description": "Raman spectrum of a synthetic sample.",
        "identifier": f"10.14272/{SAMPLE_KEY}/Raman",
        "license": LICENSE,
        "measurementTechnique": "Raman spectroscopy",
        "name": "Raman data",
        "url": f"https://www.chemotion-repository.net/inchikey/{SAMPLE_KEY}/Raman",
        "includedInDataCatalog": {"@id": EX + "catalog"},
        "isPartOf": {"@id": f"{EX}study/{SAMPLE_KEY}"},
    }
    write(FIX / "dataset_rule" / "record.json", json.dumps(p, indent=2) + "\n")
    expected = rule_outputs_dataset_rule(d, p)
    write(FIX / "dataset_rule" / "expected.nt", "".join(nt_line(t) for t in sort_triples(expected)))


def rule_outputs_dataset_rule(d, p):
    return {
        (d, RDF_TYPE, iri(NFDI + "NFDI_0000009")),
        (d, NFDI + "NFDI_0001027", iri(p["creator"]["@id"])),
        (d, NFDI + "NFDI_0000191", iri(p["publisher"]["@id"])),
        (d, OBO + "IAO_0000235", iri(node(p["description"]))),
        (d, NFDI + "NFDI_0001006", iri(node(p["identifier"]))),
        (d, NFDI + "NFDI_0000142", iri(p["license"])),
        (d, NFDI + "NFDI_0000216", lit(p["measurementTechnique"])),
        (d, OBO + "IAO_0000235", iri(node(p["name"]))),
        (d, OBO + "IAO_0000235", iri(node(p["url"]))),
        (d, NFDI + "NFDI_0001023", iri(p["isPartOf"]["@id"])),
        (d, OBO + "BFO_0000178", iri(p["includedInDataCatalog"]["@id"])),
    }


def main():
    records = corpus()
    corpus_dir = FIX / "corpus"
    for old in corpus_dir.glob("*.json"):
        old.unlink()
    quads = set()
    per_rule = {}
    per_graph = {}
    for i, r in enumerate(records, 1):
        write(corpus_dir / f"rec-{i:03}.json", json.dumps(r, indent=2, ensure_ascii=False) + "\n")
        date = dt.date.fromisoformat(r["submission_date"])
        g = graph_iri(date)
        for name, triples in rule_outputs(r["source_id"], date, r["payload"]).items():
            per_rule.setdefault(name, set()).update((g, t) for t in triples)
            quads.update((g, t) for t in triples)
    for g, _ in quads:
        per_graph[g] = per_graph.get(g, 0) + 1

    lines = sorted(quads, key=lambda q: ((1, q[0]), (1, q[1][0]), (1, q[1][1]), term_key(q[1][2])))
    write(FIX / "expected" / "corpus.nq", "".join(nt_line(t, g) for g, t in lines))

    triples = {t for _, t in quads}
    def instances(cls):
        return len({s for s, p, o in triples if p == RDF_TYPE and o == iri(cls)})
    classes = {
        "nfdicore:NFDI_0000009": NFDI + "NFDI_0000009",
        "nfdicore:NFDI_0000004": NFDI + "NFDI_0000004",
        "nfdicore:NFDI_0000003": NFDI + "NFDI_0000003",
        "nfdicore:NFDI_0000014": NFDI + "NFDI_0000014",
        "nfdicore:NFDI_0000223": NFDI + "NFDI_0000223",
        "obo:BFO_0000015": OBO + "BFO_0000015",
        "obo:CHEBI_59999": OBO + "CHEBI_59999",
        "obo:CHEBI_23367": OBO + "CHEBI_23367",
        "obo:IAO_0000109": OBO + "IAO_0000109",
        "obo:BFO_0000023": OBO + "BFO_0000023",
    }
    no_image = sum(1 for r in records
                   if "image" not in r["payload"]["isPartOf"]["about"]["hasBioChemEntityPart"])
    sample_graph = graph_iri(dt.date(2014, 5, 1))
    counts = {
        "records": len(records),
        "quads": len(quads),
        "distinct_triples": len(triples),
        "graphs": len(per_graph),
        "per_graph": dict(sorted(per_graph.items())),
        "per_rule": {k: len(v) for k, v in sorted(per_rule.items())},
        "per_class": {k: instances(v) for k, v in classes.items()},
        "records_before_2014_06": sum(1 for r in records if r["submission_date"] < "2014-06-01"),
        "molecules_without_image": len({r["payload"]["isPartOf"]["about"]["hasBioChemEntityPart"]["@id"]
                                        for r in records
                                        if "image" not in r["payload"]["isPartOf"]["about"]["hasBioChemEntityPart"]}),
        "records_without_image": no_image,
        "sample_graph": sample_graph,
        "sample_graph_quads": per_graph.get(sample_graph, 0),
    }
    write(FIX / "expected" / "counts.json", json.dumps(counts, indent=2) + "\n")

    # integrated fixture: the record the sample minted IRI points at
    first = records[0]
    write(FIX / "integrated" / "record.json", json.dumps(first, indent=2) + "\n")
    date = dt.date.fromisoformat(first["submission_date"])
    integrated = set().union(*rule_outputs(first["source_id"], date, first["payload"]).values())
    write(FIX / "integrated" / "expected.nt", "".join(nt_line(t) for t in sort_triples(integrated)))

    # seeded faults: the integrated graph minus one pattern-mandated edge each
    study = first["payload"]["isPartOf"]["@id"]
    creator = first["payload"]["creator"][0]["@id"]
    datum = first["payload"]["isPartOf"]["about"]["hasBioChemEntityPart"]["@id"] + "/molecular-weight/datum"
    faults = {
        "process_agent_role": (study, OBO + "BFO_0000057", iri(creator)),
        "measurement_unit": (datum, OBO + "IAO_0000039", iri(node("g/mol"))),
        "publishing_temporal_region": (study + "/publishing", OBO + "BFO_0000199", iri(node(first["submission_date"]))),
    }
    for name, removed in faults.items():
        assert removed in integrated, name
        g = integrated - {removed}
        write(FIX / "faults" / f"{name}.nt", "".join(nt_line(t) for t in sort_triples(g)))

    dataset_rule()
    print(json.dumps(counts, indent=2))


if __name__ == "__main__":
    main()

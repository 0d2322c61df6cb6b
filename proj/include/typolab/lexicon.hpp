// Copyright 2026 The TypoLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TYPOLAB_LEXICON_HPP_
#define TYPOLAB_LEXICON_HPP_

#include <array>
#include <string_view>

namespace typolab {

// Definition vocabulary for the synthetic word-definition corpus, roughly in
// descending order of everyday frequency. Sampling is Zipf-like over this
// order.
inline constexpr std::array<std::string_view, 333> kDefinitionLexicon = {
    "a",       "the",     "of",      "or",      "and",     "to",      "in",
    "that",    "is",      "for",     "with",    "by",      "as",      "on",
    "an",      "from",    "used",    "being",   "having",  "which",   "at",
    "not",     "one",     "who",     "its",     "into",    "small",   "large",
    "person",  "state",   "act",     "made",    "part",    "process", "quality",
    "water",   "body",    "form",    "plant",   "place",   "usually", "often",
    "something", "especially", "genus", "family", "people", "animal", "light",
    "make",    "time",    "cause",   "power",   "move",    "white",   "long",
    "group",   "land",    "young",   "tree",    "leaves",  "flowers", "fruit",
    "house",   "short",   "hard",    "soft",    "round",   "black",   "green",
    "red",     "blue",    "yellow",  "brown",   "swan",    "bird",    "fish",
    "horse",   "dog",     "cat",     "river",   "stone",   "metal",   "wood",
    "glass",   "cloth",   "paper",   "bread",   "milk",    "salt",    "sugar",
    "oil",     "fire",    "wind",    "rain",    "snow",    "ice",     "sun",
    "moon",    "star",    "sky",     "sea",     "hill",    "field",   "road",
    "town",    "city",    "room",    "door",    "wall",    "roof",    "floor",
    "table",   "chair",   "bed",     "box",     "bag",     "cup",     "bowl",
    "knife",   "tool",    "wheel",   "rope",    "chain",   "ship",    "boat",
    "cart",    "coin",    "ring",    "song",    "dance",   "game",    "book",
    "letter",  "word",    "name",    "sign",    "mark",    "line",    "edge",
    "point",   "side",    "top",     "end",     "head",    "hand",    "foot",
    "eye",     "ear",     "mouth",   "nose",    "tooth",   "hair",    "skin",
    "bone",    "blood",   "heart",   "mind",    "voice",   "child",   "woman",
    "man",     "king",    "queen",   "soldier", "farmer",  "worker",  "doctor",
    "teacher", "priest",  "judge",   "thief",   "friend",  "enemy",   "crowd",
    "army",    "church",  "school",  "market",  "shop",    "farm",    "garden",
    "forest",  "desert",  "island",  "lake",    "bridge",  "tower",   "castle",
    "prison",  "grave",   "storm",   "cloud",   "shadow",  "smoke",   "dust",
    "sand",    "mud",     "clay",    "iron",    "gold",    "silver",  "copper",
    "wool",    "silk",    "leather", "feather", "shell",   "seed",    "root",
    "branch",  "grass",   "grain",   "corn",    "rice",    "wheat",   "bean",
    "nut",     "apple",   "grape",   "lemon",   "honey",   "wine",    "beer",
    "meat",    "egg",     "cheese",  "soup",    "cake",    "oven",    "pot",
    "lamp",    "candle",  "mirror",  "bell",    "drum",    "horn",    "pipe",
    "string",  "needle",  "thread",  "button",  "pocket",  "coat",    "hat",
    "shoe",    "belt",    "glove",   "mask",    "flag",    "map",     "clock",
    "key",     "lock",    "gate",    "fence",   "well",    "pond",    "wave",
    "shore",   "cliff",   "cave",    "valley",  "north",   "south",   "east",
    "west",    "winter",  "summer",  "spring",  "autumn",  "night",   "morning",
    "cold",    "warm",    "dry",     "wet",     "dark",    "bright",  "quiet",
    "loud",    "sweet",   "bitter",  "sharp",   "smooth",  "heavy",   "thin",
    "thick",   "wide",    "narrow",  "deep",    "high",    "low",     "old",
    "new",     "fast",    "slow",    "strong",  "weak",    "rich",    "poor",
    "wild",    "tame",    "sick",    "clean",   "dirty",   "empty",   "full",
    "open",    "closed",  "cut",     "carry",   "hold",    "throw",   "pull",
    "push",    "break",   "build",   "grow",    "burn",    "cook",    "wash",
    "sell",    "buy",     "give",    "keep",    "hide",    "find",    "lose",
    "catch",   "fight",   "rest",    "sleep",
};

// Syllables for synthetic answer words.
inline constexpr std::array<std::string_view, 48> kAnswerSyllables = {
    "ba", "be", "bi", "bo", "ca", "ce", "cy", "da", "de", "di", "do", "fa",
    "fe", "fi", "ga", "go", "gu", "ka", "la", "le", "li", "lo", "ma", "me",
    "mi", "mo", "na", "ne", "ni", "no", "pa", "pe", "po", "ra", "re", "ri",
    "ro", "sa", "se", "so", "ta", "te", "ti", "to", "va", "ve", "za", "zo",
};

inline constexpr std::array<std::string_view, 12> kAnswerCodas = {
    "",  "",  "",  "n", "t", "r", "l", "s", "m", "x", "nt", "rn",
};

}  // namespace typolab

#endif  // TYPOLAB_LEXICON_HPP_

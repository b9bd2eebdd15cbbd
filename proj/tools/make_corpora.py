#!/usr/bin/env python3
"""Generates the bundled desk-scale paragraph corpora under data/.

Paragraphs are composed from per-language phrase inventories with a seeded
generator, so the files are reproducible byte for byte:

    python3 tools/make_corpora.py [--out data] [--seed 2017]
"""

import argparse
import pathlib
import random

EN = {
    "subject": [
        "The committee", "A small team of engineers", "The city council", "Local farmers",
        "The museum", "Researchers at the university", "The railway company", "Most students",
        "The old library", "A group of volunteers", "The national bank", "Fishermen on the coast",
        "The hospital", "Several newspapers", "The football club", "Young musicians",
        "The weather service", "A regional airline", "The school board", "Two independent studies",
    ],
    "verb": [
        "announced", "rejected", "studied", "completed", "described", "expanded", "reviewed",
        "questioned", "supported", "published", "delayed", "celebrated", "measured", "repaired",
        "organized", "recorded", "funded", "tested", "improved", "documented",
    ],
    "object": [
        "a new plan for the harbor", "the annual budget", "the northern bridge",
        "a collection of early maps", "the results of the survey", "an exhibition of paintings",
        "the water supply system", "a program for adult education", "the history of the valley",
        "a proposal to build more housing", "the effects of the long winter",
        "a network of bicycle paths", "the records of the first settlers",
        "a festival of folk music", "the price of fresh vegetables", "the route of the old canal",
        "a report on air quality", "the schedule for the summer season",
        "a series of public lectures", "the design of the main square",
    ],
    "tail": [
        "after a long debate", "in the spring of 1998", "despite strong opposition",
        "with help from the province", "for the first time in a decade", "during the festival",
        "before the elections", "at a meeting on Tuesday", "with little public notice",
        "in cooperation with neighboring towns", "after heavy rain in the region",
        "as part of a wider reform", "within three months", "under a new director",
        "following several complaints", "at the request of residents",
    ],
    "opener": [
        "According to officials,", "In the following years,", "At the same time,", "However,",
        "Later that month,", "As a result,", "Meanwhile,", "By the end of the year,",
        "In an interview,", "Historically,",
    ],
    "comment": [
        "the decision was welcomed by many residents", "the cost was higher than expected",
        "the work attracted visitors from abroad", "critics said the process was too slow",
        "the number of participants doubled", "the project became a model for other cities",
        "some questions remained open", "the population of the area continued to grow",
        "the original building was preserved", "new jobs were created in the district",
    ],
}

ZH = {
    "subject": [
        "市政府", "这所大学的研究人员", "当地农民", "博物馆", "铁路公司", "许多学生", "志愿者们",
        "国家银行", "沿海的渔民", "这家医院", "几家报纸", "年轻的音乐家", "气象部门", "地区航空公司",
        "教育委员会", "两项独立研究",
    ],
    "verb": [
        "宣布了", "讨论了", "完成了", "介绍了", "扩大了", "审查了", "支持了", "发表了", "推迟了",
        "庆祝了", "测量了", "修复了", "组织了", "记录了", "资助了", "改进了",
    ],
    "object": [
        "港口的新规划", "年度预算", "北边的大桥", "一批早期地图", "调查的结果", "一场画展",
        "供水系统", "成人教育计划", "山谷的历史", "建设更多住房的方案", "漫长冬季的影响",
        "自行车道网络", "第一批移民的档案", "民间音乐节", "新鲜蔬菜的价格", "旧运河的路线",
        "空气质量报告", "夏季的时间表", "一系列公开讲座", "中心广场的设计",
    ],
    "tail": [
        "经过长时间的讨论", "在一九九八年春天", "尽管遭到强烈反对", "在省里的帮助下",
        "十年来第一次", "在节日期间", "在选举之前", "在星期二的会议上", "与邻近城镇合作",
        "在该地区下了大雨之后", "作为更广泛改革的一部分", "在三个月内", "在新主任的领导下",
        "应居民的要求",
    ],
    "opener": ["据官员介绍，", "在随后的几年里，", "与此同时，", "然而，", "当月晚些时候，",
               "因此，", "到年底时，", "在一次采访中，", "从历史上看，"],
    "comment": [
        "这一决定受到许多居民的欢迎", "费用比预期的要高", "这项工作吸引了外国游客",
        "批评者认为进展太慢", "参加者的人数增加了一倍", "该项目成为其他城市的榜样",
        "一些问题仍然没有解决", "该地区的人口继续增长", "原来的建筑得到了保护", "这个地区创造了新的就业机会",
    ],
}

AR = {
    "subject": [
        "أعلنت البلدية", "قال الباحثون في الجامعة", "أكد المزارعون المحليون", "أوضح المتحف",
        "ذكرت شركة السكك الحديدية", "قال معظم الطلاب", "أكد المتطوعون", "أعلن البنك الوطني",
        "قال الصيادون على الساحل", "ذكرت المستشفى", "نشرت عدة صحف", "أعلن النادي الرياضي",
        "قالت دائرة الأرصاد الجوية", "أعلنت شركة الطيران", "أكد مجلس التعليم",
    ],
    "verb": [
        "أنها ناقشت", "أنهم أكملوا", "أنه قدم", "أنها وسعت", "أنهم راجعوا", "أنه دعم",
        "أنها أجلت", "أنهم احتفلوا ب", "أنه قاس", "أنها أصلحت", "أنهم نظموا", "أنه سجل",
        "أنها مولت", "أنهم حسنوا",
    ],
    "object": [
        "خطة جديدة للميناء", "الميزانية السنوية", "الجسر الشمالي", "مجموعة من الخرائط القديمة",
        "نتائج المسح", "معرضا للوحات", "نظام إمدادات المياه", "برنامجا لتعليم الكبار",
        "تاريخ الوادي", "مشروعا لبناء مساكن جديدة", "آثار الشتاء الطويل", "شبكة من مسارات الدراجات",
        "سجلات المستوطنين الأوائل", "مهرجانا للموسيقى الشعبية", "أسعار الخضروات الطازجة",
        "تقريرا عن جودة الهواء", "سلسلة من المحاضرات العامة", "تصميم الساحة الرئيسية",
    ],
    "tail": [
        "بعد نقاش طويل", "في ربيع عام 1998", "رغم معارضة قوية", "بمساعدة من المحافظة",
        "لأول مرة منذ عشر سنوات", "خلال المهرجان", "قبل الانتخابات", "في اجتماع يوم الثلاثاء",
        "بالتعاون مع المدن المجاورة", "بعد أمطار غزيرة في المنطقة", "في إطار إصلاح أوسع",
        "خلال ثلاثة أشهر", "تحت إدارة مدير جديد", "بناء على طلب السكان",
    ],
    "opener": ["وبحسب المسؤولين", "وفي السنوات التالية", "وفي الوقت نفسه", "غير أنه",
               "وفي وقت لاحق من الشهر", "ونتيجة لذلك", "وبحلول نهاية العام", "وفي مقابلة"],
    "comment": [
        "رحب كثير من السكان بالقرار", "كانت التكلفة أعلى من المتوقع", "جذب العمل زوارا من الخارج",
        "قال المنتقدون إن العملية بطيئة جدا", "تضاعف عدد المشاركين", "أصبح المشروع نموذجا لمدن أخرى",
        "بقيت بعض الأسئلة مفتوحة", "استمر عدد سكان المنطقة في النمو", "تم الحفاظ على المبنى الأصلي",
    ],
}


def en_sentence(rng):
    if rng.random() < 0.35:
        return f"{rng.choice(EN['opener'])} {rng.choice(EN['comment'])}."
    s = f"{rng.choice(EN['subject'])} {rng.choice(EN['verb'])} {rng.choice(EN['object'])}"
    if rng.random() < 0.7:
        s += " " + rng.choice(EN["tail"])
    return s + "."


def zh_sentence(rng):
    if rng.random() < 0.35:
        return f"{rng.choice(ZH['opener'])}{rng.choice(ZH['comment'])}。"
    s = ""
    if rng.random() < 0.7:
        s += rng.choice(ZH["tail"]) + "，"
    return s + f"{rng.choice(ZH['subject'])}{rng.choice(ZH['verb'])}{rng.choice(ZH['object'])}。"


def ar_sentence(rng):
    if rng.random() < 0.35:
        return f"{rng.choice(AR['opener'])}، {rng.choice(AR['comment'])}."
    s = f"{rng.choice(AR['subject'])} {rng.choice(AR['verb'])} {rng.choice(AR['object'])}"
    if rng.random() < 0.7:
        s += " " + rng.choice(AR["tail"])
    return s + "."


def paragraph(rng, sentence, joiner):
    # short paragraphs dominate, as in encyclopedic and newswire text
    count = min(1 + int(rng.expovariate(0.45)), 12)
    return joiner.join(sentence(rng) for _ in range(count))


def build(lang, sentence, joiner, rng, total):
    seen = set()
    out = []
    while len(out) < total:
        p = paragraph(rng, sentence, joiner)
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def write(path, lines):
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--test", type=int, default=100)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    splits = {}
    for lang, sentence, joiner in (("en", en_sentence, " "), ("zh", zh_sentence, ""),
                                   ("ar", ar_sentence, " ")):
        paras = build(lang, sentence, joiner, rng, args.train + args.test)
        splits[lang] = (paras[:args.train], paras[args.train:])
        write(out / f"{lang}.train.txt", splits[lang][0])
        write(out / f"{lang}.test.txt", splits[lang][1])

    for part, idx in (("train", 0), ("test", 1)):
        mixed = [p for lang in ("en", "zh", "ar") for p in splits[lang][idx]]
        rng.shuffle(mixed)
        write(out / f"all.{part}.txt", mixed)

    short = [p for p in splits["en"][0] if len(p.encode("utf-8")) <= 256][:32]
    write(out / "en.overfit32.txt", short)


if __name__ == "__main__":
    main()
